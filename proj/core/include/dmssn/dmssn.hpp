#pragma once

// Everything in the public API.

#include "dmssn/autoencoders.hpp"
#include "dmssn/autograd.hpp"
#include "dmssn/checkpoint.hpp"
#include "dmssn/diagnostics.hpp"
#include "dmssn/error.hpp"
#include "dmssn/homogenization.hpp"
#include "dmssn/hsi_data.hpp"
#include "dmssn/metrics.hpp"
#include "dmssn/msst.hpp"
#include "dmssn/nn.hpp"
#include "dmssn/objectives.hpp"
#include "dmssn/ops.hpp"
#include "dmssn/optimizer.hpp"
#include "dmssn/saliency_head.hpp"
#include "dmssn/tensor.hpp"
#include "dmssn/training.hpp"
