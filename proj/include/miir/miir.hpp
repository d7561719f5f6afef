#pragma once

#include "miir/error.hpp"
#include "miir/network.hpp"
#include "miir/case_io.hpp"
#include "miir/network_builder.hpp"
#include "miir/cascade.hpp"
#include "miir/lp.hpp"
#include "miir/mip.hpp"
#include "miir/bb.hpp"
#include "miir/contingency.hpp"
#include "miir/reduction.hpp"
