#include "binsum/binary/disasm.hpp"

#include <dlfcn.h>
#include <elf.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <mutex>

#include <fmt/format.h>

#include "binsum/common/text.hpp"

namespace binsum::binary {

DisasmTarget DisasmTarget::of(const ElfFile& elf) {
    DisasmTarget t;
    t.arch = elf.arch();
    t.wide = elf.is_64();
    t.big_endian = elf.big_endian();
    return t;
}

DisasmTarget DisasmTarget::of(model::Arch arch) {
    switch (arch) {
        case model::Arch::x86: return {arch, false, false};
        case model::Arch::x64: return {arch, true, false};
        case model::Arch::arm: return {arch, true, false};
        case model::Arch::mips: return {arch, false, true};
    }
    return {arch, true, false};
}

std::string format_instruction(const Instruction& insn) {
    if (insn.operands.empty()) return fmt::format("{}: {}", hex_address(insn.address), insn.mnemonic);
    return fmt::format("{}: {} {}", hex_address(insn.address), insn.mnemonic, insn.operands);
}

namespace {

// Splits "mnemonic<ws>operands" and collapses whitespace runs in the operands.
void split_mnemonic(std::string_view text, Instruction& insn) {
    auto t = trim(text);
    auto ws = t.find_first_of(" \t");
    insn.mnemonic = std::string(t.substr(0, ws));
    insn.operands.clear();
    if (ws == std::string_view::npos) return;
    bool pending_space = false;
    for (char c : trim(t.substr(ws))) {
        if (c == ' ' || c == '\t') {
            pending_space = true;
            continue;
        }
        if (pending_space && !insn.operands.empty()) insn.operands.push_back(' ');
        pending_space = false;
        insn.operands.push_back(c);
    }
}

void finish(DisasmResult& r) {
    std::string text;
    for (const auto& insn : r.instructions) {
        text += format_instruction(insn);
        text.push_back('\n');
    }
    r.text = std::move(text);
}

void record_failure(DisasmResult& r, std::uint64_t address, std::uint8_t byte) {
    r.failed_at = address;
    r.warnings.push_back(fmt::format("undecodable instruction at {} (byte {:02x}); output truncated",
                                     hex_address(address), byte));
}

}  // namespace

// ---------------------------------------------------------------------------
// LLVM

namespace {

using DisasmContext = void*;
using OpInfoCallback = int (*)(void*, std::uint64_t, std::uint64_t, std::uint64_t, int, void*);
using SymbolLookupCallback = const char* (*)(void*, std::uint64_t, std::uint64_t*, std::uint64_t, const char**);
using CreateDisasmFn = DisasmContext (*)(const char*, void*, int, OpInfoCallback, SymbolLookupCallback);
using SetOptionsFn = int (*)(DisasmContext, std::uint64_t);
using DisposeFn = void (*)(DisasmContext);
using InstructionFn = std::size_t (*)(DisasmContext, std::uint8_t*, std::uint64_t, std::uint64_t, char*, std::size_t);
using InitFn = void (*)();

constexpr std::uint64_t kOptionPrintImmHex = 2;
constexpr std::uint64_t kOptionAsmPrinterVariant = 4;

const char* triple_for(const DisasmTarget& t) {
    switch (t.arch) {
        case model::Arch::x86: return "i386-unknown-linux-gnu";
        case model::Arch::x64: return "x86_64-unknown-linux-gnu";
        case model::Arch::arm:
            if (t.wide) return t.big_endian ? "aarch64_be-unknown-linux-gnu" : "aarch64-unknown-linux-gnu";
            return t.big_endian ? "armebv7-unknown-linux-gnueabi" : "armv7-unknown-linux-gnueabi";
        case model::Arch::mips:
            if (t.wide) return t.big_endian ? "mips64-unknown-linux-gnuabi64" : "mips64el-unknown-linux-gnuabi64";
            return t.big_endian ? "mips-unknown-linux-gnu" : "mipsel-unknown-linux-gnu";
    }
    return "";
}

}  // namespace

struct LlvmDisassembler::Impl {
    void* handle = nullptr;
    std::string library;
    std::string error;
    CreateDisasmFn create = nullptr;
    SetOptionsFn set_options = nullptr;
    DisposeFn dispose = nullptr;
    InstructionFn instruction = nullptr;
    std::set<model::Arch> archs;

    template <typename Fn>
    Fn sym(const char* name) {
        return reinterpret_cast<Fn>(dlsym(handle, name));
    }

    bool init_target(const char* target) {
        auto info = sym<InitFn>(fmt::format("LLVMInitialize{}TargetInfo", target).c_str());
        auto mc = sym<InitFn>(fmt::format("LLVMInitialize{}TargetMC", target).c_str());
        auto dis = sym<InitFn>(fmt::format("LLVMInitialize{}Disassembler", target).c_str());
        if (!info || !mc || !dis) return false;
        info();
        mc();
        dis();
        return true;
    }

    void load(const std::vector<std::string>& candidates) {
        for (const auto& lib : candidates) {
            handle = dlopen(lib.c_str(), RTLD_NOW | RTLD_LOCAL);
            if (handle) {
                library = lib;
                break;
            }
        }
        if (!handle) {
            error = "no libLLVM shared library found";
            return;
        }
        create = sym<CreateDisasmFn>("LLVMCreateDisasm");
        set_options = sym<SetOptionsFn>("LLVMSetDisasmOptions");
        dispose = sym<DisposeFn>("LLVMDisasmDispose");
        instruction = sym<InstructionFn>("LLVMDisasmInstruction");
        if (!create || !set_options || !dispose || !instruction) {
            error = fmt::format("{} lacks the disassembler C API", library);
            return;
        }
        // Target registration mutates global LLVM registries; do it once,
        // before any context exists.
        if (init_target("X86")) archs.insert({model::Arch::x86, model::Arch::x64});
        bool a32 = init_target("ARM");
        bool a64 = init_target("AArch64");
        if (a32 && a64) archs.insert(model::Arch::arm);
        if (init_target("Mips")) archs.insert(model::Arch::mips);
    }
};

LlvmDisassembler::LlvmDisassembler(std::optional<std::string> library) : impl_(std::make_unique<Impl>()) {
    std::vector<std::string> candidates;
    if (library) {
        candidates.push_back(*library);
    } else {
        if (const char* env = std::getenv("BINSUM_LLVM_LIB"); env && *env) candidates.emplace_back(env);
        for (int v = 20; v >= 11; --v) candidates.push_back(fmt::format("libLLVM-{}.so.1", v));
        for (int v = 20; v >= 11; --v) candidates.push_back(fmt::format("libLLVM-{}.so", v));
        candidates.emplace_back("libLLVM.so");
    }
    // dlopen reference-counts, so a second instance shares the loaded copy;
    // serialise the one-time target registration.
    static std::mutex init_mutex;
    std::lock_guard lock(init_mutex);
    impl_->load(candidates);
}

LlvmDisassembler::~LlvmDisassembler() {
    // The library stays mapped: LLVM registers static destructors and
    // unloading it mid-process is not supported.
}

std::string LlvmDisassembler::name() const { return impl_->library.empty() ? "llvm" : "llvm:" + impl_->library; }
std::set<model::Arch> LlvmDisassembler::capability() const { return impl_->archs; }
bool LlvmDisassembler::available() const { return !impl_->archs.empty(); }
std::string LlvmDisassembler::load_error() const { return impl_->error; }

DisasmResult LlvmDisassembler::disassemble(std::span<const std::uint8_t> bytes, std::uint64_t base,
                                           const DisasmTarget& target) const {
    if (!impl_->archs.count(target.arch))
        throw CapabilityError(fmt::format("llvm disassembler does not support {}{}", model::to_string(target.arch),
                                          impl_->error.empty() ? "" : " (" + impl_->error + ")"));
    auto ctx = impl_->create(triple_for(target), nullptr, 0, nullptr, nullptr);
    if (!ctx) throw CapabilityError(fmt::format("llvm rejected target triple {}", triple_for(target)));
    std::uint64_t options = kOptionPrintImmHex;
    if (target.arch == model::Arch::x86 || target.arch == model::Arch::x64) options |= kOptionAsmPrinterVariant;
    impl_->set_options(ctx, options);

    DisasmResult r;
    std::vector<std::uint8_t> buf(bytes.begin(), bytes.end());
    std::array<char, 256> out{};
    std::size_t off = 0;
    while (off < buf.size()) {
        out[0] = '\0';
        auto n = impl_->instruction(ctx, buf.data() + off, buf.size() - off, base + off, out.data(), out.size());
        if (n == 0) {
            record_failure(r, base + off, buf[off]);
            break;
        }
        Instruction insn;
        insn.address = base + off;
        insn.size = n;
        split_mnemonic(out.data(), insn);
        r.instructions.push_back(std::move(insn));
        off += n;
    }
    impl_->dispose(ctx);
    finish(r);
    return r;
}

// ---------------------------------------------------------------------------
// objdump

namespace {

struct CommandResult {
    int status = -1;
    std::string output;
};

CommandResult run_command(const std::string& command) {
    CommandResult res;
    FILE* pipe = popen(command.c_str(), "r");
    if (!pipe) return res;
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) res.output.append(buf.data(), n);
    int st = pclose(pipe);
    res.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return res;
}

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out.push_back(c);
    }
    return out + "'";
}

}  // namespace

ObjdumpDisassembler::ObjdumpDisassembler(std::string executable) : exe_(std::move(executable)) {
    present_ = run_command(shell_quote(exe_) + " --version >/dev/null 2>&1").status == 0;
}

std::set<model::Arch> ObjdumpDisassembler::capability() const {
    if (!present_) return {};
    return {model::Arch::x86, model::Arch::x64};
}

DisasmResult ObjdumpDisassembler::disassemble(std::span<const std::uint8_t> bytes, std::uint64_t base,
                                              const DisasmTarget& target) const {
    if (!capability().count(target.arch))
        throw CapabilityError(fmt::format("objdump adapter does not support {}", model::to_string(target.arch)));
    DisasmResult r;
    if (bytes.empty()) return r;

    char path[] = "/tmp/binsum-objdump-XXXXXX";
    int fd = mkstemp(path);
    if (fd < 0) throw IoError("cannot create temporary file for objdump");
    bool ok = ::write(fd, bytes.data(), bytes.size()) == static_cast<ssize_t>(bytes.size());
    ::close(fd);
    if (!ok) {
        ::unlink(path);
        throw IoError("cannot write temporary file for objdump");
    }
    auto machine = target.arch == model::Arch::x64 ? "i386:x86-64" : "i386";
    auto cmd = fmt::format("{} -D -z -b binary -m {} -M intel --insn-width=16 --adjust-vma={:#x} {} 2>&1",
                           shell_quote(exe_), machine, base, shell_quote(path));
    auto res = run_command(cmd);
    ::unlink(path);
    if (res.status != 0) throw Error(fmt::format("objdump failed: {}", trim(res.output)));

    for (const auto& line : split_lines(res.output)) {
        // "  401000:\t48 89 d8             \tmov    rax,rbx"
        auto colon = line.find(":\t");
        if (colon == std::string::npos) continue;
        auto addr_text = trim(std::string_view(line).substr(0, colon));
        if (addr_text.empty() || addr_text.find_first_not_of("0123456789abcdef") != std::string_view::npos) continue;
        auto rest = std::string_view(line).substr(colon + 2);
        auto tab = rest.find('\t');
        auto hex = rest.substr(0, tab);
        Instruction insn;
        insn.address = parse_hex_address(addr_text);
        for (const auto& b : split(trim(hex), ' '))
            if (!b.empty()) ++insn.size;
        if (tab == std::string_view::npos) continue;
        auto asm_text = rest.substr(tab + 1);
        if (auto hash = asm_text.find(" #"); hash != std::string_view::npos) asm_text = asm_text.substr(0, hash);
        split_mnemonic(asm_text, insn);
        if (insn.mnemonic == "(bad)") {
            record_failure(r, insn.address, bytes[insn.address - base]);
            break;
        }
        r.instructions.push_back(std::move(insn));
    }
    finish(r);
    return r;
}

std::unique_ptr<DisassemblerAdapter> default_disassembler(model::Arch arch) {
    auto llvm = std::make_unique<LlvmDisassembler>();
    if (llvm->capability().count(arch)) return llvm;
    auto objdump = std::make_unique<ObjdumpDisassembler>();
    if (objdump->capability().count(arch)) return objdump;
    return nullptr;
}

DisasmResult disassemble_function(const DisassemblerAdapter& adapter, std::span<const std::uint8_t> binary,
                                  const BinFunc& func) {
    ElfFile elf(binary);
    auto target = DisasmTarget::of(elf);
    if (!adapter.capability().count(target.arch))
        throw CapabilityError(
            fmt::format("{} cannot disassemble {} code", adapter.name(), model::to_string(target.arch)));
    return adapter.disassemble(function_bytes(elf, func), func.low_pc, target);
}

}  // namespace binsum::binary
