#pragma once

// Umbrella header: joint design of sensor schedulers and remote estimators
// over unicast and broadcast networks by convex-concave iteration on the
// difference-of-convex form of the mean-squared-error objective.

#include "schedest/broadcast.hpp"
#include "schedest/ccp.hpp"
#include "schedest/io.hpp"
#include "schedest/learning.hpp"
#include "schedest/model.hpp"
#include "schedest/reduce.hpp"
#include "schedest/rng.hpp"
#include "schedest/sampler.hpp"
#include "schedest/unicast.hpp"
