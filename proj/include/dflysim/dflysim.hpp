#pragma once

#include "dflysim/common.hpp"
#include "dflysim/engine.hpp"
#include "dflysim/event_queue.hpp"
#include "dflysim/harness.hpp"
#include "dflysim/metrics.hpp"
#include "dflysim/packet.hpp"
#include "dflysim/qlearn.hpp"
#include "dflysim/routing.hpp"
#include "dflysim/topology.hpp"
#include "dflysim/workload.hpp"
