#pragma once

#include "zest/config.hpp"
#include "zest/csv.hpp"
#include "zest/diffusion_fit.hpp"
#include "zest/function_class.hpp"
#include "zest/mc_harness.hpp"
#include "zest/measure.hpp"
#include "zest/model.hpp"
#include "zest/sde_lab.hpp"
#include "zest/series_fit.hpp"
#include "zest/series_lab.hpp"
#include "zest/sieve_fit.hpp"
#include "zest/stats.hpp"
#include "zest/types.hpp"
#include "zest/zsolve.hpp"
