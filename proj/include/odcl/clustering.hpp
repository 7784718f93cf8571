#pragma once

#include "odcl/clustering/common.hpp"
#include "odcl/clustering/conditions.hpp"
#include "odcl/clustering/convex.hpp"
#include "odcl/clustering/kmeans.hpp"
#include "odcl/clustering/select.hpp"
#include "odcl/clustering/spectral.hpp"
