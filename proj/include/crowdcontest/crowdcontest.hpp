#pragma once

#include "crowdcontest/errors.hpp"
#include "crowdcontest/numerics.hpp"
#include "crowdcontest/contest.hpp"
#include "crowdcontest/csf_analysis.hpp"
#include "crowdcontest/timing.hpp"
#include "crowdcontest/bayesian_closed.hpp"
#include "crowdcontest/open_system.hpp"
#include "crowdcontest/experiment.hpp"
