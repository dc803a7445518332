#pragma once

#include "discsplat/core/camera.hpp"
#include "discsplat/core/errors.hpp"
#include "discsplat/core/gaussian.hpp"
#include "discsplat/core/gaussian_map.hpp"
#include "discsplat/core/image.hpp"
#include "discsplat/core/parallel.hpp"
#include "discsplat/core/se3.hpp"
#include "discsplat/core/sh.hpp"
#include "discsplat/eval/fit_frame.hpp"
#include "discsplat/eval/metrics.hpp"
#include "discsplat/eval/pipeline.hpp"
#include "discsplat/eval/scene.hpp"
#include "discsplat/global/keyframes.hpp"
#include "discsplat/io/config.hpp"
#include "discsplat/io/ply.hpp"
#include "discsplat/io/png.hpp"
#include "discsplat/io/sequence.hpp"
#include "discsplat/io/trajectory.hpp"
#include "discsplat/mapping/adding.hpp"
#include "discsplat/mapping/config.hpp"
#include "discsplat/mapping/loss.hpp"
#include "discsplat/mapping/masks.hpp"
#include "discsplat/mapping/optimizer.hpp"
#include "discsplat/mapping/state.hpp"
#include "discsplat/preproc/frame_preproc.hpp"
#include "discsplat/render/backward.hpp"
#include "discsplat/render/forward.hpp"
#include "discsplat/render/projection.hpp"
#include "discsplat/render/tiles.hpp"
#include "discsplat/tracking/icp.hpp"
