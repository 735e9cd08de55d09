#pragma once

// Umbrella header.

#include "cumad/autoencoder.hpp"
#include "cumad/calibration.hpp"
#include "cumad/dataset.hpp"
#include "cumad/detector.hpp"
#include "cumad/eval.hpp"
#include "cumad/features.hpp"
#include "cumad/model_io.hpp"
#include "cumad/packet.hpp"
#include "cumad/sprt.hpp"
