#pragma once

#include "das/autodiff.hpp"
#include "das/baselines.hpp"
#include "das/classifier.hpp"
#include "das/features.hpp"
#include "das/grad_check.hpp"
#include "das/grad_suite.hpp"
#include "das/metrics.hpp"
#include "das/param_store.hpp"
#include "das/random.hpp"
#include "das/sampler.hpp"
#include "das/synth.hpp"
#include "das/tensor.hpp"
#include "das/training.hpp"
