// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hn3d/ablation.hpp"
#include "hn3d/dataset.hpp"
#include "hn3d/encoder.hpp"
#include "hn3d/error.hpp"
#include "hn3d/eval.hpp"
#include "hn3d/loss.hpp"
#include "hn3d/numkit.hpp"
#include "hn3d/parallel.hpp"
#include "hn3d/similarity.hpp"
#include "hn3d/simstore.hpp"
#include "hn3d/synthdata.hpp"
#include "hn3d/tensor_io.hpp"
#include "hn3d/trainer.hpp"
