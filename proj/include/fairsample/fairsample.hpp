#ifndef FAIRSAMPLE_FAIRSAMPLE_HPP
#define FAIRSAMPLE_FAIRSAMPLE_HPP

// Everything except the Eigen-backed oracles in validation.hpp.

#include "fairsample/baselines.hpp"
#include "fairsample/error.hpp"
#include "fairsample/experiment.hpp"
#include "fairsample/ising.hpp"
#include "fairsample/made.hpp"
#include "fairsample/mcmc.hpp"
#include "fairsample/metrics.hpp"
#include "fairsample/optimize.hpp"
#include "fairsample/parallel.hpp"
#include "fairsample/qaoa.hpp"
#include "fairsample/qsim.hpp"
#include "fairsample/random.hpp"
#include "fairsample/sat.hpp"
#include "fairsample/spin_config.hpp"

#endif  // FAIRSAMPLE_FAIRSAMPLE_HPP
