#pragma once

#include "cluster/config.hpp"
#include "cluster/dataset_io.hpp"
#include "cluster/diagnostics.hpp"
#include "cluster/distributions.hpp"
#include "cluster/errors.hpp"
#include "cluster/evaluation.hpp"
#include "cluster/manifest.hpp"
#include "cluster/model.hpp"
#include "cluster/posterior_io.hpp"
#include "cluster/prediction.hpp"
#include "cluster/rng.hpp"
#include "cluster/sampler.hpp"
#include "cluster/simplex.hpp"
#include "cluster/simulator.hpp"
#include "cluster/transform.hpp"
