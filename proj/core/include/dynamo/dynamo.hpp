#pragma once

#include "dynamo/basis.hpp"
#include "dynamo/checkpoint.hpp"
#include "dynamo/dg.hpp"
#include "dynamo/env.hpp"
#include "dynamo/equations.hpp"
#include "dynamo/error.hpp"
#include "dynamo/estimators.hpp"
#include "dynamo/io.hpp"
#include "dynamo/mesh.hpp"
#include "dynamo/metrics.hpp"
#include "dynamo/policies.hpp"
#include "dynamo/problems.hpp"
#include "dynamo/simulation.hpp"
#include "dynamo/trainer.hpp"
