#pragma once

// Umbrella header.

#include "ipnet/autodiff.hpp"
#include "ipnet/channel.hpp"
#include "ipnet/errors.hpp"
#include "ipnet/evaluation.hpp"
#include "ipnet/io.hpp"
#include "ipnet/linalg.hpp"
#include "ipnet/model.hpp"
#include "ipnet/precoding.hpp"
#include "ipnet/rng.hpp"
#include "ipnet/training.hpp"
#include "ipnet/vectorize.hpp"
