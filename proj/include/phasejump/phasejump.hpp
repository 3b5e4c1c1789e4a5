#pragma once

#include "phasejump/bloch.hpp"
#include "phasejump/config.hpp"
#include "phasejump/core.hpp"
#include "phasejump/errors.hpp"
#include "phasejump/hvmodels.hpp"
#include "phasejump/io.hpp"
#include "phasejump/ode.hpp"
#include "phasejump/pulses.hpp"
#include "phasejump/rng.hpp"
#include "phasejump/scenarios.hpp"
#include "phasejump/selection.hpp"
#include "phasejump/stats.hpp"
#include "phasejump/trajectories.hpp"
#include "phasejump/version.hpp"
