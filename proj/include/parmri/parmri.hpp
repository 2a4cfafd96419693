#pragma once

// Parallel-MRI reconstruction toolkit: unrolled denoiser + data-consistency
// schemes over SENSE-style forward models, with training, per-volume
// finetuning, style transfer and ensembling. Everything is header-only;
// include this to get the full library.

#include "parmri/cg.hpp"
#include "parmri/config.hpp"
#include "parmri/dc.hpp"
#include "parmri/ensemble.hpp"
#include "parmri/fft.hpp"
#include "parmri/io.hpp"
#include "parmri/loss.hpp"
#include "parmri/metrics.hpp"
#include "parmri/net.hpp"
#include "parmri/operators.hpp"
#include "parmri/optim.hpp"
#include "parmri/rng.hpp"
#include "parmri/simulate.hpp"
#include "parmri/ssim.hpp"
#include "parmri/train.hpp"
#include "parmri/types.hpp"
#include "parmri/unrolled.hpp"
