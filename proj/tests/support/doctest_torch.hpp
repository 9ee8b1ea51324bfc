#pragma once

// libtorch defines glog-style CHECK macros; include it first and let
// doctest's assertion macros take the names.
#include <torch/torch.h>

#undef CHECK
#undef CHECK_EQ
#undef CHECK_NE
#undef CHECK_LT
#undef CHECK_LE
#undef CHECK_GT
#undef CHECK_GE
#undef CHECK_NOTNULL
#undef CHECK_FALSE

#include <doctest.h>
