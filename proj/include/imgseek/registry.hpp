#pragma once

#include "imgseek/core.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace imgseek {

using Params = nlohmann::json;

/// Manager side of the Manager/Parameters pattern: maps a registered name to
/// a factory building an immutable, configured instance of Base.
template <typename Base>
class Registry {
 public:
  using Factory = std::function<std::shared_ptr<const Base>(const Params&)>;

  Registry(std::string kind) : kind_(std::move(kind)) {}

  void add(const std::string& name, std::set<std::string> allowedKeys, Factory factory) {
    entries_[name] = Entry{std::move(allowedKeys), std::move(factory)};
  }

  std::shared_ptr<const Base> select(const std::string& name, const Params& params = Params::object()) const {
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw Error(ErrorCode::UnknownComponent, kind_ + " '" + name + "' is not registered");
    if (!params.is_null() && !params.is_object())
      throw Error(ErrorCode::InvalidParameter, kind_ + " parameters must be a JSON object");
    if (params.is_object()) {
      for (const auto& [key, _] : params.items()) {
        if (!it->second.allowedKeys.count(key))
          throw Error(ErrorCode::InvalidParameter,
                      "unknown parameter '" + key + "' for " + kind_ + " '" + name + "'");
      }
    }
    try {
      return it->second.factory(params.is_null() ? Params::object() : params);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidParameter, kind_ + " '" + name + "': " + e.what());
    }
  }

  bool contains(const std::string& name) const { return entries_.count(name) > 0; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : entries_) out.push_back(name);
    return out;
  }

  const std::string& kind() const { return kind_; }

 private:
  struct Entry {
    std::set<std::string> allowedKeys;
    Factory factory;
  };
  std::string kind_;
  std::map<std::string, Entry> entries_;
};

template <typename T>
T paramOr(const Params& params, const char* key, T fallback) {
  if (!params.contains(key)) return fallback;
  return params.at(key).get<T>();
}

}  // namespace imgseek
