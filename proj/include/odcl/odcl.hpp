#pragma once

#include "odcl/clustering.hpp"
#include "odcl/csv.hpp"
#include "odcl/data.hpp"
#include "odcl/erm.hpp"
#include "odcl/eval.hpp"
#include "odcl/experiment.hpp"
#include "odcl/protocol.hpp"
#include "odcl/rng.hpp"
#include "odcl/types.hpp"
