#pragma once

#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cogdiag/error.hpp"

namespace cogdiag::cli {

/// Registers options on a subcommand and resolves each value with precedence
/// CLI flag > JSON config > built-in default. The JSON key is the long flag
/// with dashes replaced by underscores.
class OptionRegistry {
public:
    explicit OptionRegistry(CLI::App& cmd) : cmd_(cmd) {}

    template <typename T>
    CLI::Option* add(const std::string& flag, T& target, const std::string& help) {
        CLI::Option* option = cmd_.add_option(flag, target, help);
        entries_.push_back({json_key(flag), option,
                            [&target](const nlohmann::json& v) { target = v.get<T>(); },
                            [&target] { return nlohmann::json(target); }});
        return option;
    }

    CLI::Option* add_flag(const std::string& flag, bool& target, const std::string& help) {
        CLI::Option* option = cmd_.add_flag(flag, target, help);
        entries_.push_back({json_key(flag), option,
                            [&target](const nlohmann::json& v) { target = v.get<bool>(); },
                            [&target] { return nlohmann::json(target); }});
        return option;
    }

    /// Applies the JSON config and reports resolved values plus their source.
    void resolve(const nlohmann::json& config, nlohmann::json& resolved, nlohmann::json& sources) {
        for (const auto& [key, value] : config.items()) {
            if (key == "config") continue;
            bool known = false;
            for (const auto& entry : entries_) known = known || entry.key == key;
            if (!known) throw ConfigError("unknown config key '" + key + "'");
        }
        for (const auto& entry : entries_) {
            const bool from_cli = entry.option->count() > 0;
            if (!from_cli && config.contains(entry.key)) {
                try {
                    entry.apply(config.at(entry.key));
                } catch (const nlohmann::json::exception& e) {
                    throw ConfigError("config key '" + entry.key + "': " + e.what());
                }
                sources[entry.key] = "json";
            } else {
                sources[entry.key] = from_cli ? "cli" : "default";
            }
            resolved[entry.key] = entry.current();
        }
    }

private:
    struct Entry {
        std::string key;
        CLI::Option* option;
        std::function<void(const nlohmann::json&)> apply;
        std::function<nlohmann::json()> current;
    };

    static std::string json_key(const std::string& flag) {
        std::string key = flag.substr(flag.find_first_not_of('-'));
        for (auto& c : key)
            if (c == '-') c = '_';
        return key;
    }

    CLI::App& cmd_;
    std::vector<Entry> entries_;
};

}  // namespace cogdiag::cli
