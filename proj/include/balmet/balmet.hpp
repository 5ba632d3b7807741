#pragma once

#include "balmet/errors.hpp"
#include "balmet/numerics.hpp"
#include "balmet/series.hpp"
#include "balmet/solver.hpp"
#include "balmet/dominating.hpp"
#include "balmet/two_sided.hpp"
#include "balmet/contraction.hpp"
#include "balmet/report.hpp"
