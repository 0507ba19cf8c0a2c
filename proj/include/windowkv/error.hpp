// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace windowkv {

enum class ErrorKind {
    kValidation,        // bad arguments, config or dimensions
    kOutOfRange,        // layer/head/token index outside the trace
    kFormat,            // malformed trace bytes or unreadable/unwritable files
    kInfeasibleBudget,  // a layer cannot hold its observation window
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return m_kind; }

private:
    ErrorKind m_kind;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) {
        fail(kind, message);
    }
}

const char* to_string(ErrorKind kind) noexcept;

}  // namespace windowkv
