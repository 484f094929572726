#include "tatonnement/io.hpp"

#include <fstream>
#include <sstream>

namespace tat {

using nlohmann::json;

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const json& j) {
  if (!j.is_array()) throw ParseError("expected an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError("expected an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

json market_to_json(const MarketSpec& spec) {
  json goods = json::array();
  for (int i = 0; i < spec.n(); ++i)
    goods.push_back({{"name", spec.names[i]}, {"supply", spec.supplies[i]}});
  json buyers = json::array();
  for (const auto& b : spec.buyers) {
    json jb;
    jb["family"] = b.family == UtilityFamily::ces ? "ces" : "cobb_douglas";
    if (b.family == UtilityFamily::ces) jb["rho"] = b.rho;
    jb["weights"] = vec_to_json(b.weights);
    jb["money"] = b.money;
    buyers.push_back(jb);
  }
  return {{"goods", goods}, {"buyers", buyers}};
}

MarketSpec market_from_json(const json& j) {
  try {
    const auto& goods = j.at("goods");
    Vec supplies(static_cast<Eigen::Index>(goods.size()));
    std::vector<std::string> names;
    for (std::size_t i = 0; i < goods.size(); ++i) {
      names.push_back(goods[i].at("name").get<std::string>());
      supplies[static_cast<Eigen::Index>(i)] = goods[i].at("supply").get<double>();
    }
    std::vector<BuyerSpec> buyers;
    for (const auto& jb : j.at("buyers")) {
      const auto family = jb.at("family").get<std::string>();
      Vec w = vec_from_json(jb.at("weights"));
      const double money = jb.at("money").get<double>();
      if (family == "cobb_douglas") {
        buyers.push_back(BuyerSpec::cobb_douglas(std::move(w), money));
      } else if (family == "ces") {
        buyers.push_back(BuyerSpec::ces(jb.at("rho").get<double>(), std::move(w), money));
      } else {
        throw ParseError("unknown utility family '" + family + "'");
      }
    }
    return make_market(std::move(supplies), std::move(buyers), std::move(names));
  } catch (const json::exception& e) {
    throw ParseError(std::string("market json: ") + e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace tat
