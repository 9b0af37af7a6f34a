// Umbrella header: pulls in the whole library.
#ifndef BCF_BCF_HPP
#define BCF_BCF_HPP

#include "bcf/chaos.hpp"
#include "bcf/common.hpp"
#include "bcf/data.hpp"
#include "bcf/graph.hpp"
#include "bcf/harness.hpp"
#include "bcf/metrics.hpp"
#include "bcf/models.hpp"
#include "bcf/tensor.hpp"

#endif  // BCF_BCF_HPP
