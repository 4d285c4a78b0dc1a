// Copyright 2026 The WNOS Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef WNOS_COMPILED_HPP_
#define WNOS_COMPILED_HPP_

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "wnos/expr.hpp"

namespace wnos {

// Dense numbering of variables shared by a group of compiled expressions.
class SlotMap {
 public:
  int Intern(const VarId& id);
  int Find(const VarId& id) const;  // -1 when absent
  std::size_t size() const { return ids_.size(); }
  const std::vector<VarId>& ids() const { return ids_; }

 private:
  std::unordered_map<VarId, int, VarIdHash> index_;
  std::vector<VarId> ids_;
};

// Postfix tape of an expanded expression. Evaluation semantics match Eval(),
// including DomainError on log/sqrt/division domain violations.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  CompiledExpr(const Expr& expr, SlotMap& slots);

  double operator()(std::span<const double> values) const;
  bool empty() const { return ops_.empty(); }

 private:
  enum class Op : std::uint8_t { kConst, kLoad, kAdd, kMul, kNeg, kDiv, kLog2, kLn, kSqrt };
  struct Instr {
    Op op;
    std::int32_t arg;  // slot, arity, or constant index
  };

  void Emit(const Expr& e, SlotMap& slots, int depth);

  std::vector<Instr> ops_;
  std::vector<double> constants_;
  int max_depth_ = 0;
};

}  // namespace wnos

#endif  // WNOS_COMPILED_HPP_
