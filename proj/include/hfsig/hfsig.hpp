#pragma once

#include "hfsig/augment.hpp"
#include "hfsig/dataset.hpp"
#include "hfsig/eval.hpp"
#include "hfsig/fft.hpp"
#include "hfsig/fir.hpp"
#include "hfsig/modem.hpp"
#include "hfsig/modes.hpp"
#include "hfsig/nn.hpp"
#include "hfsig/parallel.hpp"
#include "hfsig/rng.hpp"
#include "hfsig/shard.hpp"
#include "hfsig/signal.hpp"
#include "hfsig/spectrum.hpp"
#include "hfsig/tensor.hpp"
#include "hfsig/train.hpp"
#include "hfsig/watterson.hpp"
