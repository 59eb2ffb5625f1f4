#pragma once

#include "pedpred/autoencoder.hpp"
#include "pedpred/baselines.hpp"
#include "pedpred/config.hpp"
#include "pedpred/core.hpp"
#include "pedpred/encoders.hpp"
#include "pedpred/environments.hpp"
#include "pedpred/eval.hpp"
#include "pedpred/forecaster.hpp"
#include "pedpred/io.hpp"
#include "pedpred/nn/adam.hpp"
#include "pedpred/nn/gradcheck.hpp"
#include "pedpred/nn/kernels.hpp"
#include "pedpred/nn/layers.hpp"
#include "pedpred/nn/tape.hpp"
#include "pedpred/nn/tensor.hpp"
#include "pedpred/predictor.hpp"
#include "pedpred/random.hpp"
#include "pedpred/simforces.hpp"
#include "pedpred/weights.hpp"
