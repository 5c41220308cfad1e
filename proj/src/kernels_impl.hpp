#pragma once

#include "sgpg/kernels.hpp"

namespace sgpg::kernels::detail {

extern const KernelTable kScalarTable;

#if defined(SGPG_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif

}  // namespace sgpg::kernels::detail
