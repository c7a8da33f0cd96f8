"""Dalvik opcode names and instruction formats."""

# format id -> width in 16-bit code units
FORMAT_UNITS = {
    "10x": 1, "12x": 1, "11n": 1, "11x": 1, "10t": 1,
    "20t": 2, "22x": 2, "21t": 2, "21s": 2, "21h": 2, "21c": 2,
    "23x": 2, "22b": 2, "22t": 2, "22s": 2, "22c": 2,
    "30t": 3, "32x": 3, "31i": 3, "31t": 3, "31c": 3, "35c": 3, "3rc": 3,
    "45cc": 4, "4rcc": 4, "51l": 5,
}

OPCODES = [("unused", "10x")] * 256


def _set(op, name, fmt):
    OPCODES[op] = (name, fmt)


for _op, _name, _fmt in [
    (0x00, "nop", "10x"), (0x01, "move", "12x"), (0x02, "move/from16", "22x"), (0x03, "move/16", "32x"),
    (0x04, "move-wide", "12x"), (0x05, "move-wide/from16", "22x"), (0x06, "move-wide/16", "32x"),
    (0x07, "move-object", "12x"), (0x08, "move-object/from16", "22x"), (0x09, "move-object/16", "32x"),
    (0x0A, "move-result", "11x"), (0x0B, "move-result-wide", "11x"), (0x0C, "move-result-object", "11x"),
    (0x0D, "move-exception", "11x"), (0x0E, "return-void", "10x"), (0x0F, "return", "11x"),
    (0x10, "return-wide", "11x"), (0x11, "return-object", "11x"),
    (0x12, "const/4", "11n"), (0x13, "const/16", "21s"), (0x14, "const", "31i"), (0x15, "const/high16", "21h"),
    (0x16, "const-wide/16", "21s"), (0x17, "const-wide/32", "31i"), (0x18, "const-wide", "51l"),
    (0x19, "const-wide/high16", "21h"), (0x1A, "const-string", "21c"), (0x1B, "const-string/jumbo", "31c"),
    (0x1C, "const-class", "21c"), (0x1D, "monitor-enter", "11x"), (0x1E, "monitor-exit", "11x"),
    (0x1F, "check-cast", "21c"), (0x20, "instance-of", "22c"), (0x21, "array-length", "12x"),
    (0x22, "new-instance", "21c"), (0x23, "new-array", "22c"), (0x24, "filled-new-array", "35c"),
    (0x25, "filled-new-array/range", "3rc"), (0x26, "fill-array-data", "31t"), (0x27, "throw", "11x"),
    (0x28, "goto", "10t"), (0x29, "goto/16", "20t"), (0x2A, "goto/32", "30t"),
    (0x2B, "packed-switch", "31t"), (0x2C, "sparse-switch", "31t"),
]:
    _set(_op, _name, _fmt)

for _i, _name in enumerate(["cmpl-float", "cmpg-float", "cmpl-double", "cmpg-double", "cmp-long"]):
    _set(0x2D + _i, _name, "23x")
for _i, _name in enumerate(["eq", "ne", "lt", "ge", "gt", "le"]):
    _set(0x32 + _i, f"if-{_name}", "22t")
    _set(0x38 + _i, f"if-{_name}z", "21t")
_SUFFIXES = ["", "-wide", "-object", "-boolean", "-byte", "-char", "-short"]
for _i, _s in enumerate(_SUFFIXES):
    _set(0x44 + _i, f"aget{_s}", "23x")
    _set(0x4B + _i, f"aput{_s}", "23x")
    _set(0x52 + _i, f"iget{_s}", "22c")
    _set(0x59 + _i, f"iput{_s}", "22c")
    _set(0x60 + _i, f"sget{_s}", "21c")
    _set(0x67 + _i, f"sput{_s}", "21c")
for _i, _name in enumerate(["virtual", "super", "direct", "static", "interface"]):
    _set(0x6E + _i, f"invoke-{_name}", "35c")
    _set(0x74 + _i, f"invoke-{_name}/range", "3rc")
for _i, _name in enumerate([
    "neg-int", "not-int", "neg-long", "not-long", "neg-float", "neg-double", "int-to-long", "int-to-float",
    "int-to-double", "long-to-int", "long-to-float", "long-to-double", "float-to-int", "float-to-long",
    "float-to-double", "double-to-int", "double-to-long", "double-to-float", "int-to-byte", "int-to-char",
    "int-to-short",
]):
    _set(0x7B + _i, _name, "12x")
_BINOPS = []
for _t, _ops in (("int", ["add", "sub", "mul", "div", "rem", "and", "or", "xor", "shl", "shr", "ushr"]),
                 ("long", ["add", "sub", "mul", "div", "rem", "and", "or", "xor", "shl", "shr", "ushr"]),
                 ("float", ["add", "sub", "mul", "div", "rem"]),
                 ("double", ["add", "sub", "mul", "div", "rem"])):
    _BINOPS += [f"{o}-{_t}" for o in _ops]
for _i, _name in enumerate(_BINOPS):
    _set(0x90 + _i, _name, "23x")
    _set(0xB0 + _i, f"{_name}/2addr", "12x")
for _i, _name in enumerate(["add-int", "rsub-int", "mul-int", "div-int", "rem-int", "and-int", "or-int", "xor-int"]):
    _set(0xD0 + _i, f"{_name}/lit16", "22s")
for _i, _name in enumerate(["add-int", "rsub-int", "mul-int", "div-int", "rem-int", "and-int", "or-int", "xor-int",
                            "shl-int", "shr-int", "ushr-int"]):
    _set(0xD8 + _i, f"{_name}/lit8", "22b")
_set(0xFA, "invoke-polymorphic", "45cc")
_set(0xFB, "invoke-polymorphic/range", "4rcc")
_set(0xFC, "invoke-custom", "35c")
_set(0xFD, "invoke-custom/range", "3rc")
_set(0xFE, "const-method-handle", "21c")
_set(0xFF, "const-method-type", "21c")

OPCODE_BY_NAME = {name: (op, fmt) for op, (name, fmt) in enumerate(OPCODES) if name != "unused"}

PACKED_SWITCH_PAYLOAD = 0x0100
SPARSE_SWITCH_PAYLOAD = 0x0200
FILL_ARRAY_DATA_PAYLOAD = 0x0300
