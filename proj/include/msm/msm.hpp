#pragma once

// Umbrella header for the msm library: mixture-based extraction of latent
// drift/diffusion features from time series, and the rolling forecasters
// that consume them.

#include "msm/csv.hpp"
#include "msm/features.hpp"
#include "msm/forecasting.hpp"
#include "msm/kernels.hpp"
#include "msm/optim.hpp"
#include "msm/reconstruction.hpp"
#include "msm/separation.hpp"
#include "msm/series.hpp"
#include "msm/svg.hpp"
#include "msm/weighting.hpp"
