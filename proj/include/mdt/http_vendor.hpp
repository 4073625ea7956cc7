#pragma once

// Every translation unit must see httplib with the same feature macros;
// include it through this header only.
#ifdef MDT_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
