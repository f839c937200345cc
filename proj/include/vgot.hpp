#pragma once

#include "vgot/casting.hpp"
#include "vgot/conditioning.hpp"
#include "vgot/config.hpp"
#include "vgot/context.hpp"
#include "vgot/diffusion.hpp"
#include "vgot/error.hpp"
#include "vgot/image_encoder.hpp"
#include "vgot/latent.hpp"
#include "vgot/llm_http.hpp"
#include "vgot/metrics.hpp"
#include "vgot/pipeline.hpp"
#include "vgot/random.hpp"
#include "vgot/script.hpp"
#include "vgot/shot_video.hpp"
#include "vgot/smooth.hpp"
#include "vgot/story_io.hpp"
#include "vgot/tensor_io.hpp"
