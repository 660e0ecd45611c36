#pragma once

// Private helper shared by the scenario and simulation config parsers.

#include <set>
#include <sstream>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "harvest_guard/errors.hpp"

namespace harvest_guard::ini {

namespace pt = boost::property_tree;

inline pt::ptree parse(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return tree;
}

/// Typed lookups that remember which keys were consumed, so typos surface
/// as errors instead of silently keeping a default.
class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  template <class T>
  void get(const std::string& section, const std::string& key, T& field) {
    seen_.insert(section + "\n" + key);
    const auto sec = tree_.get_child_optional(pt::ptree::path_type(section, '\n'));
    if (!sec) return;
    const auto value = sec->get_optional<std::string>(pt::ptree::path_type(key, '\n'));
    if (!value) return;
    std::istringstream in(*value);
    T parsed{};
    if constexpr (std::is_same_v<T, bool>) {
      in >> std::boolalpha >> parsed;
    } else {
      in >> parsed;
    }
    if (!in || !(in >> std::ws).eof() || (std::is_unsigned_v<T> && value->find('-') != std::string::npos))
      throw ValidationError(fmt::format("config [{}] {} = '{}' is not a valid value", section, key, *value));
    field = parsed;
  }

  void get_string(const std::string& section, const std::string& key, std::string& field) {
    seen_.insert(section + "\n" + key);
    const auto sec = tree_.get_child_optional(pt::ptree::path_type(section, '\n'));
    if (!sec) return;
    if (const auto value = sec->get_optional<std::string>(pt::ptree::path_type(key, '\n'))) field = *value;
  }

  bool has(const std::string& section, const std::string& key) const {
    const auto sec = tree_.get_child_optional(pt::ptree::path_type(section, '\n'));
    return sec && sec->get_child_optional(pt::ptree::path_type(key, '\n'));
  }

  bool has_section(const std::string& section) const {
    return static_cast<bool>(tree_.get_child_optional(pt::ptree::path_type(section, '\n')));
  }

  /// Keys never asked for inside the listed sections are rejected.
  void reject_unknown_keys(const std::set<std::string>& sections) const {
    for (const auto& [section, body] : tree_) {
      if (!sections.count(section)) continue;
      for (const auto& [key, value] : body)
        if (!seen_.count(section + "\n" + key))
          throw ValidationError(fmt::format("config [{}] has unknown key '{}'", section, key));
    }
  }

  void reject_unknown_sections(const std::set<std::string>& sections) const {
    for (const auto& [section, body] : tree_)
      if (!sections.count(section)) throw ValidationError(fmt::format("config has unknown section [{}]", section));
  }

  const pt::ptree& tree() const { return tree_; }

 private:
  const pt::ptree& tree_;
  std::set<std::string> seen_;
};

}  // namespace harvest_guard::ini
