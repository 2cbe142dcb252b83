#pragma once

// Umbrella header for the shipwright library: a miniature coordinator/worker
// query engine that executes sampled group-by/count queries under either
// function shipping (worker computes, ships the result) or data shipping
// (coordinator pulls raw tuples one-sidedly and computes locally), with a
// cost-model planner and a deterministic virtual-time simulator.

#include "shipwright/bench.hpp"
#include "shipwright/clusternode.hpp"
#include "shipwright/exec.hpp"
#include "shipwright/planner.hpp"
#include "shipwright/relation.hpp"
#include "shipwright/rng.hpp"
#include "shipwright/sampling.hpp"
#include "shipwright/socket_backend.hpp"
#include "shipwright/telemetry.hpp"
#include "shipwright/transport.hpp"
