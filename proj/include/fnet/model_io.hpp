#pragma once

#include <string>
#include <utility>

#include "fnet/container.hpp"
#include "fnet/model.hpp"

namespace fnet {

/// Spec fields plus one tensor per parameter, in Params::for_each order.
Container model_container(const ModelSpec& spec, const Params& params);
std::pair<ModelSpec, Params> model_from_container(const Container& c, const std::string& origin);

}  // namespace fnet
