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

#include "wnos/compiled.hpp"

#include <algorithm>
#include <cmath>

#include "wnos/error.hpp"

namespace wnos {

int SlotMap::Intern(const VarId& id) {
  auto [it, inserted] = index_.emplace(id, static_cast<int>(ids_.size()));
  if (inserted) ids_.push_back(id);
  return it->second;
}

int SlotMap::Find(const VarId& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? -1 : it->second;
}

CompiledExpr::CompiledExpr(const Expr& expr, SlotMap& slots) { Emit(expr, slots, 1); }

void CompiledExpr::Emit(const Expr& e, SlotMap& slots, int depth) {
  max_depth_ = std::max(max_depth_, depth);
  switch (e.kind()) {
    case NodeKind::kConstant:
      constants_.push_back(e.value());
      ops_.push_back({Op::kConst, static_cast<std::int32_t>(constants_.size() - 1)});
      return;
    case NodeKind::kVariable:
      ops_.push_back({Op::kLoad, slots.Intern(e.var())});
      return;
    case NodeKind::kSum:
    case NodeKind::kProduct: {
      auto kids = e.children();
      if (kids.empty()) {
        constants_.push_back(e.kind() == NodeKind::kSum ? 0.0 : 1.0);
        ops_.push_back({Op::kConst, static_cast<std::int32_t>(constants_.size() - 1)});
        return;
      }
      for (std::size_t i = 0; i < kids.size(); ++i) {
        Emit(kids[i], slots, depth + static_cast<int>(i));
      }
      ops_.push_back({e.kind() == NodeKind::kSum ? Op::kAdd : Op::kMul,
                      static_cast<std::int32_t>(kids.size())});
      return;
    }
    case NodeKind::kNegation:
      Emit(e.child(0), slots, depth);
      ops_.push_back({Op::kNeg, 0});
      return;
    case NodeKind::kQuotient:
      Emit(e.child(0), slots, depth);
      Emit(e.child(1), slots, depth + 1);
      ops_.push_back({Op::kDiv, 0});
      return;
    case NodeKind::kFunction: {
      Emit(e.child(0), slots, depth);
      Op op = e.func() == Func::kLog2 ? Op::kLog2 : e.func() == Func::kLn ? Op::kLn : Op::kSqrt;
      ops_.push_back({op, 0});
      return;
    }
    case NodeKind::kBigSum:
      throw Error(ErrorKind::kUnsupportedNode,
                  "big-sum over '" + e.index_set() + "' must be expanded before compilation");
  }
}

double CompiledExpr::operator()(std::span<const double> values) const {
  constexpr int kInline = 128;
  double inline_stack[kInline];
  std::vector<double> heap;
  double* stack = inline_stack;
  if (max_depth_ > kInline) {
    heap.resize(max_depth_);
    stack = heap.data();
  }
  int top = 0;
  for (const Instr& in : ops_) {
    switch (in.op) {
      case Op::kConst: stack[top++] = constants_[in.arg]; break;
      case Op::kLoad: stack[top++] = values[in.arg]; break;
      case Op::kAdd: {
        double s = 0.0;
        for (int i = top - in.arg; i < top; ++i) s += stack[i];
        top -= in.arg;
        stack[top++] = s;
        break;
      }
      case Op::kMul: {
        double p = 1.0;
        for (int i = top - in.arg; i < top; ++i) p *= stack[i];
        top -= in.arg;
        stack[top++] = p;
        break;
      }
      case Op::kNeg: stack[top - 1] = -stack[top - 1]; break;
      case Op::kDiv: {
        double den = stack[--top];
        if (den == 0.0) throw Error(ErrorKind::kDomainError, "division by zero");
        stack[top - 1] /= den;
        break;
      }
      case Op::kLog2:
        if (!(stack[top - 1] > 0.0)) throw Error(ErrorKind::kDomainError, "log2 of non-positive value");
        stack[top - 1] = std::log2(stack[top - 1]);
        break;
      case Op::kLn:
        if (!(stack[top - 1] > 0.0)) throw Error(ErrorKind::kDomainError, "log of non-positive value");
        stack[top - 1] = std::log(stack[top - 1]);
        break;
      case Op::kSqrt:
        if (stack[top - 1] < 0.0) throw Error(ErrorKind::kDomainError, "sqrt of negative value");
        stack[top - 1] = std::sqrt(stack[top - 1]);
        break;
    }
  }
  return top > 0 ? stack[top - 1] : 0.0;
}

}  // namespace wnos
