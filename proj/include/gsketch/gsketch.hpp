#pragma once

#include "gsketch/estimator.hpp"
#include "gsketch/generators.hpp"
#include "gsketch/gsampler.hpp"
#include "gsketch/hash.hpp"
#include "gsketch/hessian.hpp"
#include "gsketch/io.hpp"
#include "gsketch/levels.hpp"
#include "gsketch/lp.hpp"
#include "gsketch/measures.hpp"
#include "gsketch/oracle.hpp"
#include "gsketch/sensitivity.hpp"
#include "gsketch/sgd.hpp"
#include "gsketch/sketch.hpp"
#include "gsketch/sparse_table.hpp"
#include "gsketch/tensor.hpp"
