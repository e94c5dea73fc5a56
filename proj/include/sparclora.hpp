#pragma once

#include "sparclora/channel.hpp"
#include "sparclora/error.hpp"
#include "sparclora/frame.hpp"
#include "sparclora/ingest.hpp"
#include "sparclora/power.hpp"
#include "sparclora/protocol.hpp"
#include "sparclora/random.hpp"
#include "sparclora/report.hpp"
#include "sparclora/scenario.hpp"
#include "sparclora/simulator.hpp"
#include "sparclora/time.hpp"
#include "sparclora/trace.hpp"
