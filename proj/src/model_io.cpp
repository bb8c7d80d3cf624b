#include "fnet/model_io.hpp"

#include <charconv>
#include <cstdio>

namespace fnet {
namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t parse_count(const Container& c, const std::string& key, const std::string& origin) {
  const std::string& text = c.field(key);
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw FormatError(origin + ": bad value for " + key + ": '" + text + "'");
  }
  return v;
}

}  // namespace

Container model_container(const ModelSpec& spec, const Params& params) {
  params.check_shapes(spec);
  Container c;
  c.set("kind", "model");
  c.set("conv_filters", std::to_string(spec.conv_filters));
  c.set("kernel_size", std::to_string(spec.kernel_size));
  c.set("dense_units", std::to_string(spec.dense_units));
  c.set("dropout_rate", format_double(spec.dropout_rate));
  c.set("input_side", std::to_string(spec.input_side));
  c.set("input_channels", std::to_string(spec.input_channels));
  c.set("classes", std::to_string(spec.classes));
  c.set("parameters", std::to_string(spec.parameter_count()));
  params.for_each([&](const char* name, const Tensor& t) { c.tensors.emplace_back(name, t); });
  return c;
}

std::pair<ModelSpec, Params> model_from_container(const Container& c, const std::string& origin) {
  ModelSpec spec;
  try {
    spec.conv_filters = parse_count(c, "conv_filters", origin);
    spec.kernel_size = parse_count(c, "kernel_size", origin);
    spec.dense_units = parse_count(c, "dense_units", origin);
    spec.input_side = parse_count(c, "input_side", origin);
    spec.input_channels = parse_count(c, "input_channels", origin);
    spec.classes = parse_count(c, "classes", origin);
    spec.dropout_rate = std::stod(c.field("dropout_rate"));
    spec.validate();
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(origin + ": invalid model header (" + e.what() + ")");
  }
  Params p;
  p.for_each([&](const char* name, Tensor& t) { t = c.tensor(name); });
  try {
    p.check_shapes(spec);
  } catch (const ShapeError& e) {
    throw FormatError(origin + ": " + e.what());
  }
  return {spec, std::move(p)};
}

void save_model(const ModelSpec& spec, const Params& params, const std::filesystem::path& path) {
  write_container(path, model_container(spec, params));
}

std::pair<ModelSpec, Params> load_model(const std::filesystem::path& path) {
  return model_from_container(read_container(path), path.string());
}

}  // namespace fnet
