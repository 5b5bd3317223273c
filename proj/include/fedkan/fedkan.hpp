#pragma once

#include "fedkan/commands.hpp"
#include "fedkan/data.hpp"
#include "fedkan/error.hpp"
#include "fedkan/federation.hpp"
#include "fedkan/gradcheck.hpp"
#include "fedkan/layers.hpp"
#include "fedkan/loss.hpp"
#include "fedkan/model.hpp"
#include "fedkan/optim.hpp"
#include "fedkan/parameter_vector.hpp"
#include "fedkan/random.hpp"
#include "fedkan/report.hpp"
#include "fedkan/spline.hpp"
#include "fedkan/tensor.hpp"
