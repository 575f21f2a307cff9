#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "binsum/binary/elf.hpp"
#include "binsum/binary/extract.hpp"
#include "binsum/common/error.hpp"
#include "binsum/model/record.hpp"

namespace binsum::binary {

class CapabilityError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* category() const noexcept override { return "capability"; }
};

// `Arch` alone is ambiguous for ARM (A32 vs A64) and MIPS (endianness, width);
// the target pins the exact instruction set.
struct DisasmTarget {
    model::Arch arch = model::Arch::x64;
    bool wide = true;  // 64-bit ISA (x86-64, AArch64, MIPS64)
    bool big_endian = false;

    static DisasmTarget of(const ElfFile& elf);
    static DisasmTarget of(model::Arch arch);  // common default per arch
};

struct Instruction {
    std::uint64_t address = 0;
    std::size_t size = 0;
    std::string mnemonic;
    std::string operands;
};

struct DisasmResult {
    std::string text;  // one `0x<addr>: mnemonic operands` line per instruction
    std::vector<Instruction> instructions;
    std::vector<std::string> warnings;
    std::optional<std::uint64_t> failed_at;  // first undecodable address
    [[nodiscard]] bool complete() const { return !failed_at; }
};

std::string format_instruction(const Instruction& insn);

class DisassemblerAdapter {
public:
    virtual ~DisassemblerAdapter() = default;
    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual std::set<model::Arch> capability() const = 0;
    // Throws CapabilityError when target.arch is not in capability().
    // Decoding stops at the first invalid encoding; everything before it is
    // returned together with a warning naming the address.
    virtual DisasmResult disassemble(std::span<const std::uint8_t> bytes, std::uint64_t base,
                                     const DisasmTarget& target) const = 0;

    DisasmResult disassemble(std::span<const std::uint8_t> bytes, std::uint64_t base, model::Arch arch) const {
        return disassemble(bytes, base, DisasmTarget::of(arch));
    }
};

// LLVM MC disassembler loaded at runtime from the shared libLLVM (x86, x64,
// ARM/AArch64, MIPS). Capability is empty when no library can be loaded.
// Intel syntax on x86. Safe to use from several threads.
class LlvmDisassembler final : public DisassemblerAdapter {
public:
    // `library` overrides the search (BINSUM_LLVM_LIB, then libLLVM-{20..11}.so.1).
    explicit LlvmDisassembler(std::optional<std::string> library = std::nullopt);
    ~LlvmDisassembler() override;
    LlvmDisassembler(const LlvmDisassembler&) = delete;
    LlvmDisassembler& operator=(const LlvmDisassembler&) = delete;

    [[nodiscard]] std::string name() const override;
    [[nodiscard]] std::set<model::Arch> capability() const override;
    [[nodiscard]] bool available() const;
    [[nodiscard]] std::string load_error() const;
    using DisassemblerAdapter::disassemble;
    DisasmResult disassemble(std::span<const std::uint8_t> bytes, std::uint64_t base,
                             const DisasmTarget& target) const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// GNU objdump in raw-binary mode. Only x86 targets are assumed supported.
class ObjdumpDisassembler final : public DisassemblerAdapter {
public:
    explicit ObjdumpDisassembler(std::string executable = "objdump");
    [[nodiscard]] std::string name() const override { return "objdump"; }
    [[nodiscard]] std::set<model::Arch> capability() const override;
    using DisassemblerAdapter::disassemble;
    DisasmResult disassemble(std::span<const std::uint8_t> bytes, std::uint64_t base,
                             const DisasmTarget& target) const override;

private:
    std::string exe_;
    bool present_ = false;
};

// First adapter that can serve `arch`, LLVM preferred; nullptr when none.
std::unique_ptr<DisassemblerAdapter> default_disassembler(model::Arch arch);

// Disassembles [func.low_pc, func.high_pc) of an ELF image.
DisasmResult disassemble_function(const DisassemblerAdapter& adapter, std::span<const std::uint8_t> binary,
                                  const BinFunc& func);

}  // namespace binsum::binary
