#pragma once

#include "ergodic/agent.hpp"
#include "ergodic/cartpole.hpp"
#include "ergodic/diagnostics.hpp"
#include "ergodic/env_core.hpp"
#include "ergodic/error.hpp"
#include "ergodic/io.hpp"
#include "ergodic/loess.hpp"
#include "ergodic/policy.hpp"
#include "ergodic/risk_sensitive.hpp"
#include "ergodic/rng.hpp"
#include "ergodic/serialize.hpp"
#include "ergodic/trajectory.hpp"
#include "ergodic/transform.hpp"
