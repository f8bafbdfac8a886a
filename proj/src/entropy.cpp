#include "dspas/entropy.hpp"

#include <lzma.h>

#include <algorithm>
#include <numeric>
#include <string>

#include "dspas/byte_io.hpp"
#include "dspas/error.hpp"

namespace dspas {

namespace {

constexpr std::uint8_t kEscape = 0x88;
constexpr std::size_t kMinZeroRun = 4;
constexpr std::size_t kMaxZeroRun = 0xffff;
constexpr std::uint32_t kLzmaDictSize = 1u << 22;

[[noreturn]] void corrupt(const std::string& context, const std::string& what) {
    throw IntegrityError(IntegrityError::Kind::corrupt_digest, context + ": " + what);
}

void check_quant_bits(unsigned quant_bits) {
    if (quant_bits < kMinQuantBits || quant_bits > kMaxQuantBits) {
        throw ContractViolation("quantization bits must be in [2, 16], got " + std::to_string(quant_bits));
    }
}

std::size_t packed_size(std::size_t code_count, unsigned quant_bits) {
    return (code_count * quant_bits + 7) / 8;
}

lzma_options_lzma lzma_options() {
    lzma_options_lzma opts{};
    lzma_lzma_preset(&opts, 6);
    opts.dict_size = kLzmaDictSize;
    opts.lc = 0;
    opts.lp = 0;
    opts.pb = 0;
    return opts;
}

Bytes run_lzma(lzma_stream& strm, ByteView input, const std::string& context, bool decoding) {
    Bytes out(std::max<std::size_t>(input.size() * (decoding ? 4 : 1) + 256, 4096));
    strm.next_in = input.data();
    strm.avail_in = input.size();
    strm.next_out = out.data();
    strm.avail_out = out.size();
    for (;;) {
        const lzma_ret ret = lzma_code(&strm, LZMA_FINISH);
        if (ret == LZMA_STREAM_END) {
            break;
        }
        if (ret != LZMA_OK) {
            lzma_end(&strm);
            if (decoding) {
                corrupt(context, "LZMA stream is damaged (code " + std::to_string(ret) + ")");
            }
            throw Error("LZMA encoder failed (code " + std::to_string(ret) + ")");
        }
        if (strm.avail_out == 0) {
            const std::size_t used = out.size();
            out.resize(used * 2);
            strm.next_out = out.data() + used;
            strm.avail_out = out.size() - used;
        } else if (decoding && strm.avail_in == 0) {
            lzma_end(&strm);
            corrupt(context, "LZMA stream ends early");
        }
    }
    out.resize(out.size() - strm.avail_out);
    lzma_end(&strm);
    return out;
}

Bytes lzma_compress(ByteView input) {
    lzma_options_lzma opts = lzma_options();
    lzma_filter filters[] = {{LZMA_FILTER_LZMA2, &opts}, {LZMA_VLI_UNKNOWN, nullptr}};
    lzma_stream strm = LZMA_STREAM_INIT;
    if (lzma_raw_encoder(&strm, filters) != LZMA_OK) {
        throw Error("could not initialise the LZMA encoder");
    }
    return run_lzma(strm, input, "encoder", false);
}

Bytes lzma_decompress(ByteView input, const std::string& context) {
    lzma_options_lzma opts = lzma_options();
    lzma_filter filters[] = {{LZMA_FILTER_LZMA2, &opts}, {LZMA_VLI_UNKNOWN, nullptr}};
    lzma_stream strm = LZMA_STREAM_INIT;
    if (lzma_raw_decoder(&strm, filters) != LZMA_OK) {
        throw Error("could not initialise the LZMA decoder");
    }
    return run_lzma(strm, input, context, true);
}

} // namespace

bool is_known_codec(std::uint8_t id) noexcept {
    return id == static_cast<std::uint8_t>(CodecId::zero_run) || id == static_cast<std::uint8_t>(CodecId::zero_run_lzma);
}

Bytes pack_codes(std::span<const QuantizedChunk> chunks, unsigned quant_bits) {
    check_quant_bits(quant_bits);
    std::size_t total = 0;
    for (const auto& c : chunks) {
        total += c.codes.size();
    }
    Bytes out(packed_size(total, quant_bits), 0);
    const std::uint32_t mask = (1u << quant_bits) - 1;
    std::size_t bit = 0;
    for (const auto& c : chunks) {
        for (std::int32_t code : c.codes) {
            std::uint32_t v = static_cast<std::uint32_t>(code) & mask;
            for (unsigned done = 0; done < quant_bits;) {
                const unsigned shift = bit % 8;
                const unsigned take = std::min(8 - shift, quant_bits - done);
                out[bit / 8] |= static_cast<std::uint8_t>((v & ((1u << take) - 1)) << shift);
                v >>= take;
                done += take;
                bit += take;
            }
        }
    }
    return out;
}

std::vector<std::int32_t> unpack_codes(ByteView packed, std::size_t code_count, unsigned quant_bits) {
    check_quant_bits(quant_bits);
    if (packed.size() < packed_size(code_count, quant_bits)) {
        throw IntegrityError(IntegrityError::Kind::truncated, "packed code stream is shorter than expected");
    }
    std::vector<std::int32_t> out;
    out.reserve(code_count);
    const std::uint32_t sign = 1u << (quant_bits - 1);
    std::size_t bit = 0;
    for (std::size_t i = 0; i < code_count; ++i) {
        std::uint32_t v = 0;
        for (unsigned done = 0; done < quant_bits;) {
            const unsigned shift = bit % 8;
            const unsigned take = std::min(8 - shift, quant_bits - done);
            v |= ((static_cast<std::uint32_t>(packed[bit / 8]) >> shift) & ((1u << take) - 1)) << done;
            done += take;
            bit += take;
        }
        out.push_back((v & sign) ? static_cast<std::int32_t>(v) - static_cast<std::int32_t>(sign << 1)
                                 : static_cast<std::int32_t>(v));
    }
    return out;
}

Bytes zero_run_encode(ByteView packed) {
    Bytes out;
    out.reserve(packed.size());
    ByteWriter w(out);
    std::size_t i = 0;
    while (i < packed.size()) {
        const std::uint8_t b = packed[i];
        if (b == 0) {
            std::size_t j = i;
            while (j < packed.size() && packed[j] == 0 && j - i < kMaxZeroRun) {
                ++j;
            }
            const std::size_t run = j - i;
            if (run >= kMinZeroRun) {
                w.u8(kEscape);
                w.u16(static_cast<std::uint16_t>(run));
            } else {
                w.zeros(run);
            }
            i = j;
            continue;
        }
        w.u8(b);
        if (b == kEscape) {
            w.u16(0);
        }
        ++i;
    }
    return out;
}

Bytes zero_run_decode(ByteView encoded, std::size_t expected_size) {
    Bytes out;
    out.reserve(expected_size);
    ByteReader r(encoded, "zero-run stream");
    while (r.remaining() > 0) {
        const std::uint8_t b = r.u8();
        if (b != kEscape) {
            out.push_back(b);
        } else if (const std::uint16_t run = r.u16(); run == 0) {
            out.push_back(kEscape);
        } else {
            out.insert(out.end(), run, 0);
        }
        if (out.size() > expected_size) {
            throw IntegrityError(IntegrityError::Kind::corrupt_digest, "zero-run stream expands past its expected size");
        }
    }
    if (out.size() != expected_size) {
        throw IntegrityError(IntegrityError::Kind::corrupt_digest, "zero-run stream expands to " +
                                                                       std::to_string(out.size()) + " bytes, expected " +
                                                                       std::to_string(expected_size));
    }
    return out;
}

Bytes entropy_encode(std::span<const QuantizedChunk> chunks, unsigned quant_bits, CodecId codec) {
    if (!is_known_codec(static_cast<std::uint8_t>(codec))) {
        throw ContractViolation("unknown codec id " + std::to_string(static_cast<int>(codec)));
    }
    Bytes out;
    ByteWriter w(out);
    w.u32(static_cast<std::uint32_t>(chunks.size()));
    for (const auto& c : chunks) {
        w.u8(c.exponent);
    }
    w.u8(static_cast<std::uint8_t>(codec));
    Bytes body = zero_run_encode(pack_codes(chunks, quant_bits));
    if (codec == CodecId::zero_run_lzma) {
        body = lzma_compress(body);
    }
    w.bytes(body);
    return out;
}

std::vector<QuantizedChunk> entropy_decode(ByteView stream, std::uint32_t chunk_count, unsigned quant_bits,
                                           std::size_t transform_size, const std::string& context) {
    check_quant_bits(quant_bits);
    try {
        ByteReader r(stream, context);
        const std::uint32_t stored_count = r.u32();
        if (stored_count != chunk_count) {
            corrupt(context, "stream holds " + std::to_string(stored_count) + " chunks, flow table says " +
                                 std::to_string(chunk_count));
        }
        ByteView exponents = r.bytes(chunk_count);
        const std::uint8_t codec = r.u8();
        if (!is_known_codec(codec)) {
            corrupt(context, "unknown codec id " + std::to_string(codec));
        }
        ByteView body = r.bytes(r.remaining());
        const std::size_t code_count = static_cast<std::size_t>(chunk_count) * transform_size;
        Bytes run_coded;
        if (codec == static_cast<std::uint8_t>(CodecId::zero_run_lzma)) {
            run_coded = lzma_decompress(body, context);
            body = run_coded;
        }
        const Bytes packed = zero_run_decode(body, packed_size(code_count, quant_bits));
        const auto codes = unpack_codes(packed, code_count, quant_bits);

        std::vector<QuantizedChunk> out(chunk_count);
        for (std::uint32_t i = 0; i < chunk_count; ++i) {
            out[i].chunk_index = i;
            out[i].exponent = exponents[i];
            out[i].codes.assign(codes.begin() + static_cast<std::ptrdiff_t>(i * transform_size),
                                codes.begin() + static_cast<std::ptrdiff_t>((i + 1) * transform_size));
        }
        return out;
    } catch (const IntegrityError& e) {
        if (e.kind() == IntegrityError::Kind::corrupt_digest && std::string(e.what()).starts_with(context)) {
            throw;
        }
        corrupt(context, e.what());
    }
}

Ratio data_reduction_ratio(unsigned word_size, unsigned quant_bits) {
    check_quant_bits(quant_bits);
    const std::uint64_t num = static_cast<std::uint64_t>(word_size) * 8;
    const std::uint64_t g = std::gcd(num, static_cast<std::uint64_t>(quant_bits));
    return {num / g, quant_bits / g};
}

} // namespace dspas
