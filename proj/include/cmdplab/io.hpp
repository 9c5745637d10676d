#pragma once

/*
 * JSON (de)serialization of models and feature maps.
 *
 * Layout (keys in this order, nested arrays indexed [s][a] / [s][a][s'] /
 * [s][a][d]):
 *   { "n_states", "n_actions", "gamma", "b", "rho", "P", "r", "u", "phi"? }
 * Probability rows are re-normalized on load when they sum to 1 within
 * 1e-9 (absorbing decimal round-trip dust) and rejected beyond that.
 */

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmdplab/cmdp.hpp"
#include "cmdplab/fa.hpp"

namespace cmdplab {

struct ModelFile {
  Cmdp mdp;
  std::optional<FeatureMap> phi;
};

inline nlohmann::ordered_json to_json(const Cmdp& mdp,
                                      const std::optional<FeatureMap>& phi = std::nullopt) {
  nlohmann::ordered_json j;
  j["n_states"] = mdp.n_states;
  j["n_actions"] = mdp.n_actions;
  j["gamma"] = mdp.gamma;
  j["b"] = mdp.b;
  j["rho"] = mdp.init_dist;

  nlohmann::ordered_json trans = nlohmann::ordered_json::array();
  for (int s = 0; s < mdp.n_states; ++s) {
    nlohmann::ordered_json per_action = nlohmann::ordered_json::array();
    for (int a = 0; a < mdp.n_actions; ++a) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (int s2 = 0; s2 < mdp.n_states; ++s2) row.push_back(mdp.p(s, a, s2));
      per_action.push_back(std::move(row));
    }
    trans.push_back(std::move(per_action));
  }
  j["P"] = std::move(trans);

  const auto table = [&](const std::vector<double>& t) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (int s = 0; s < mdp.n_states; ++s) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (int a = 0; a < mdp.n_actions; ++a) row.push_back(t[mdp.sa(s, a)]);
      out.push_back(std::move(row));
    }
    return out;
  };
  j["r"] = table(mdp.reward);
  j["u"] = table(mdp.utility);

  if (phi) {
    nlohmann::ordered_json f = nlohmann::ordered_json::array();
    for (int s = 0; s < phi->n_states; ++s) {
      nlohmann::ordered_json per_action = nlohmann::ordered_json::array();
      for (int a = 0; a < phi->n_actions; ++a) {
        nlohmann::ordered_json vec = nlohmann::ordered_json::array();
        const double* row = phi->at(s, a);
        for (int d = 0; d < phi->dim; ++d) vec.push_back(row[d]);
        per_action.push_back(std::move(vec));
      }
      f.push_back(std::move(per_action));
    }
    j["phi"] = std::move(f);
  }
  return j;
}

namespace detail {

/* Re-normalize a probability row whose decimal round trip left dust; reject
 * rows that are genuinely off. */
inline void renormalize_row(std::vector<double>& row, std::size_t begin, std::size_t count,
                            const char* what) {
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    if (!(row[begin + i] >= 0.0))
      throw std::invalid_argument(std::string("model load: negative probability in ") + what);
    sum += row[begin + i];
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument(std::string("model load: ") + what +
                                " row sums to " + std::to_string(sum) + ", not 1 within 1e-9");
  for (std::size_t i = 0; i < count; ++i) row[begin + i] /= sum;
}

}  // namespace detail

inline ModelFile from_json(const nlohmann::json& j) {
  const int S = j.at("n_states").get<int>();
  const int A = j.at("n_actions").get<int>();
  if (S < 1 || A < 1) throw std::invalid_argument("model load: sizes must be >= 1");
  const double gamma = j.at("gamma").get<double>();
  const double b = j.at("b").get<double>();

  const std::size_t n_sa = static_cast<std::size_t>(S) * A;
  std::vector<double> transition(n_sa * S), reward(n_sa), utility(n_sa);
  const auto& jt = j.at("P");
  const auto& jr = j.at("r");
  const auto& ju = j.at("u");
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      const std::size_t sa = static_cast<std::size_t>(s) * A + a;
      for (int s2 = 0; s2 < S; ++s2) transition[sa * S + s2] = jt.at(s).at(a).at(s2).get<double>();
      detail::renormalize_row(transition, sa * S, S, "transition");
      reward[sa] = jr.at(s).at(a).get<double>();
      utility[sa] = ju.at(s).at(a).get<double>();
    }

  std::vector<double> rho = j.at("rho").get<std::vector<double>>();
  if (rho.size() != static_cast<std::size_t>(S))
    throw std::invalid_argument("model load: rho length mismatch");
  detail::renormalize_row(rho, 0, rho.size(), "rho");

  ModelFile out;
  out.mdp.n_states = S;
  out.mdp.n_actions = A;
  out.mdp.transition = std::move(transition);
  out.mdp.reward = std::move(reward);
  out.mdp.utility = std::move(utility);
  out.mdp.b = b;
  out.mdp.gamma = gamma;
  out.mdp.init_dist = std::move(rho);
  out.mdp.validate();

  if (j.contains("phi")) {
    FeatureMap f;
    f.n_states = S;
    f.n_actions = A;
    const auto& jf = j.at("phi");
    f.dim = static_cast<int>(jf.at(0).at(0).size());
    f.phi.resize(n_sa * f.dim);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const auto& vec = jf.at(s).at(a);
        if (static_cast<int>(vec.size()) != f.dim)
          throw std::invalid_argument("model load: ragged phi vectors");
        for (int d = 0; d < f.dim; ++d)
          f.phi[(static_cast<std::size_t>(s) * A + a) * f.dim + d] = vec.at(d).get<double>();
      }
    f.validate();
    out.phi = std::move(f);
  }
  return out;
}

inline void save_model(const std::string& path, const Cmdp& mdp,
                       const std::optional<FeatureMap>& phi = std::nullopt) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_model: cannot open " + path);
  f << to_json(mdp, phi).dump(2) << "\n";
}

inline ModelFile load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_model: cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_model: " + path + " is not valid JSON: " + e.what());
  }
  try {
    return from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_model: " + path + " has malformed fields: " + e.what());
  }
}

}  // namespace cmdplab
