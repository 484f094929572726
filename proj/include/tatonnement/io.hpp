#pragma once

#include "tatonnement/market.hpp"

#include <json.hpp>

#include <string>

namespace tat {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

nlohmann::json market_to_json(const MarketSpec& spec);
MarketSpec market_from_json(const nlohmann::json& j);

nlohmann::json vec_to_json(const Vec& v);
Vec vec_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace tat
