// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <string>

#include "forge/civil_time.hpp"
#include "forge/util.hpp"

#ifndef FORGE_REPO_ROOT
#define FORGE_REPO_ROOT "."
#endif

namespace testutil {

inline forge::fs::path repo_root() { return forge::fs::path(FORGE_REPO_ROOT); }
inline forge::fs::path data_dir() { return repo_root() / "data"; }
inline forge::fs::path sample_dataset() { return data_dir() / "sample"; }
inline forge::fs::path fixtures_dir() { return data_dir() / "fixtures"; }
inline forge::fs::path transcripts_dir() { return data_dir() / "transcripts"; }
inline forge::fs::path assets_dir() { return repo_root() / "assets"; }

/// Fresh scratch directory, removed on destruction.
struct TempDir {
    forge::fs::path path;
    TempDir() {
        static std::atomic<uint64_t> counter{0};
        path = forge::fs::temp_directory_path() /
               forge::util::format("forge-test-%d-%llu", static_cast<int>(::getpid()),
                                   static_cast<unsigned long long>(++counter));
        forge::fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        forge::fs::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

inline forge::AnchorTimestamp anchor(const std::string& iso) { return forge::civil::parse_anchor(iso); }

/// The bundled benchmark anchor: Appendix-style 2026-01-13 afternoon, +08:00.
inline forge::AnchorTimestamp sample_anchor() { return anchor("2026-01-13T14:54:09+08:00"); }

/// Copies a directory tree (for corrupting dataset/fixture copies in tests).
inline void copy_tree(const forge::fs::path& from, const forge::fs::path& to) {
    forge::fs::create_directories(to);
    forge::fs::copy(from, to,
                    forge::fs::copy_options::recursive | forge::fs::copy_options::overwrite_existing);
}

} // namespace testutil
