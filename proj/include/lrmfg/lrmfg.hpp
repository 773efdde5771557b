#pragma once

#include "lrmfg/core/cost.hpp"
#include "lrmfg/core/error.hpp"
#include "lrmfg/core/interaction.hpp"
#include "lrmfg/core/kernel.hpp"
#include "lrmfg/core/measure.hpp"
#include "lrmfg/core/random.hpp"
#include "lrmfg/core/types.hpp"
#include "lrmfg/graphon/cut_norm.hpp"
#include "lrmfg/graphon/kernel_matrix.hpp"
#include "lrmfg/nplayer/costs.hpp"
#include "lrmfg/nplayer/nash_gap.hpp"
#include "lrmfg/nplayer/simulate.hpp"
#include "lrmfg/solver/hjb.hpp"
#include "lrmfg/solver/kolmogorov.hpp"
#include "lrmfg/solver/mfg.hpp"
#include "lrmfg/solver/monotonicity.hpp"
