#pragma once

#include "cascade/codegen.hpp"

namespace cascade::codegen {

void load_loc(x64::Assembler& as, x64::Reg r, const Loc& loc);
/// Unwind to the activation stub's saved registers and return the failure status.
void emit_trap_tail(x64::Assembler& as);

}  // namespace cascade::codegen
