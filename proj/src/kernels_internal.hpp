#pragma once

#include "vine/kernels.hpp"

namespace vine::kernels::detail {

#if defined(VINE_HAVE_AVX2)
extern const KernelTable avx2_kernels;
#endif

}  // namespace vine::kernels::detail
