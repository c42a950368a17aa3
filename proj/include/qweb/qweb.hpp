#pragma once

#include "statevec.hpp"
#include "optimize.hpp"
#include "measures.hpp"
#include "webstates.hpp"
#include "protocol.hpp"
#include "eprep.hpp"
