#pragma once

#include "indt/augment.hpp"
#include "indt/config.hpp"
#include "indt/core.hpp"
#include "indt/ctsim.hpp"
#include "indt/detector/anchors.hpp"
#include "indt/detector/boxes.hpp"
#include "indt/detector/inference.hpp"
#include "indt/detector/loss.hpp"
#include "indt/detector/model_io.hpp"
#include "indt/detector/network.hpp"
#include "indt/eval.hpp"
#include "indt/pgm.hpp"
#include "indt/phantom.hpp"
#include "indt/pipeline.hpp"
#include "indt/random.hpp"
#include "indt/store.hpp"
#include "indt/trainer.hpp"
