#pragma once

#include "dimension/error.hpp"
#include "dimension/rng.hpp"
#include "dimension/volume.hpp"
#include "dimension/fft.hpp"
#include "dimension/sampling.hpp"
#include "dimension/config.hpp"
#include "dimension/presets.hpp"
#include "dimension/params.hpp"
#include "dimension/conv.hpp"
#include "dimension/tape.hpp"
#include "dimension/network.hpp"
#include "dimension/loss.hpp"
#include "dimension/optim.hpp"
#include "dimension/binary_io.hpp"
#include "dimension/phantom.hpp"
#include "dimension/dataset.hpp"
#include "dimension/checkpoint.hpp"
#include "dimension/metrics.hpp"
#include "dimension/trainer.hpp"
#include "dimension/gradcheck.hpp"
#include "dimension/experiment.hpp"
