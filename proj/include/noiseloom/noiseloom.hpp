// noiseloom.hpp — umbrella header.

#pragma once

#include "noiseloom/envmodel.hpp"
#include "noiseloom/errors.hpp"
#include "noiseloom/modelfile.hpp"
#include "noiseloom/noisestats.hpp"
#include "noiseloom/opensim.hpp"
#include "noiseloom/qcore.hpp"
#include "noiseloom/quasiprob.hpp"
#include "noiseloom/rng.hpp"
#include "noiseloom/sampler.hpp"
#include "noiseloom/util.hpp"
