#pragma once

#include "lpcnet/common.hpp"
#include "lpcnet/dsp.hpp"
#include "lpcnet/io.hpp"
#include "lpcnet/log.hpp"
#include "lpcnet/lpc.hpp"
#include "lpcnet/model.hpp"
#include "lpcnet/nn.hpp"
#include "lpcnet/sampler.hpp"
#include "lpcnet/synth.hpp"
#include "lpcnet/weights.hpp"
