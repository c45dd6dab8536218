// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>

#include "forge/util.hpp"

namespace forge::assets {

/// Asset root resolution: FORGE_ASSETS_DIR, else ./assets.
inline fs::path root() {
    std::string env = util::getenv_or("FORGE_ASSETS_DIR");
    if (!env.empty()) return fs::path(env);
    return fs::path("assets");
}

inline std::string load(const std::string& relative, const fs::path& assets_dir = {}) {
    fs::path base = assets_dir.empty() ? root() : assets_dir;
    return util::read_file(base / relative);
}

/// Replaces {name} placeholders. Placeholders the caller did not supply are
/// an error, so template/variable drift never ships silently. Substituted
/// values may themselves contain braces; they are not re-scanned.
inline std::string fill(const std::string& tmpl, const std::map<std::string, std::string>& values) {
    auto open = tmpl.find('{');
    while (open != std::string::npos) {
        auto close = tmpl.find('}', open);
        if (close != std::string::npos && close - open <= 40) {
            std::string name = tmpl.substr(open + 1, close - open - 1);
            bool ident = !name.empty();
            for (char c : name)
                if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) ident = false;
            if (ident && !values.count(name))
                throw Error("prompt template placeholder left unfilled: {" + name + "}");
        }
        open = tmpl.find('{', open + 1);
    }
    std::string out = tmpl;
    for (const auto& [key, value] : values)
        out = util::replace_all(out, "{" + key + "}", value);
    return out;
}

} // namespace forge::assets
