// Copyright (C) 2026 The WindowKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "windowkv/error.hpp"

namespace windowkv {

Error::Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), m_kind(kind) {}

void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::kValidation: return "validation";
        case ErrorKind::kOutOfRange: return "out_of_range";
        case ErrorKind::kFormat: return "format";
        case ErrorKind::kInfeasibleBudget: return "infeasible_budget";
    }
    return "unknown";
}

}  // namespace windowkv
