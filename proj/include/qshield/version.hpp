#pragma once

#define QSHIELD_VERSION "0.1.0"
