#pragma once

// Everything except OpenCV-backed I/O (chorder/io.hpp).

#include "chorder/baselines.hpp"
#include "chorder/checkpoint.hpp"
#include "chorder/config.hpp"
#include "chorder/data.hpp"
#include "chorder/detectors.hpp"
#include "chorder/errors.hpp"
#include "chorder/eval.hpp"
#include "chorder/image.hpp"
#include "chorder/permutation.hpp"
#include "chorder/random.hpp"
#include "chorder/ranking.hpp"
#include "chorder/scorer.hpp"
#include "chorder/train.hpp"
