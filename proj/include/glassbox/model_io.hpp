#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <variant>

#include "glassbox/ebm.hpp"
#include "glassbox/ensemble.hpp"

namespace glassbox {

using Model = std::variant<ForestModel, BoostedModel, EbmModel>;

inline constexpr std::string_view kModelFormat = "glassbox-model";
inline constexpr int kModelFormatVersion = 1;

// "forest", "boosted" or "ebm".
std::string_view model_kind_tag(const Model& model);

std::vector<double> predict_proba(const Model& model, const Matrix& x);

// JSON document: {"format", "version", "kind", "params", "n_features", ...}.
// Doubles are written in shortest round-trip form, so a reloaded model
// predicts bit-identically.
void write_model(std::ostream& out, const Model& model);

// Throws CorruptModelError on truncated or malformed input and
// ModelVersionError on an unsupported version or unknown kind tag.
Model read_model(std::istream& in);

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace glassbox
