"""Writes a tiny ONNX encoder pair plus tokenizer in the neural backend layout,
with numpy reference outputs, for the neural crate's tests.

    python3 scripts/make_tiny_model.py crates/neural/tests/fixtures
"""

import json
import sys
from pathlib import Path

import numpy as np
import onnx
from onnx import TensorProto, helper, numpy_helper
from tokenizers import Tokenizer, models, pre_tokenizers, processors

DIM = 8
CONTEXT = 77
OPSET = 13

ATTACK = "face image morphing attack"
BONA_FIDE = "bona-fide presentation"
BOS, EOS, PAD, UNK = "<|startoftext|>", "<|endoftext|>", "[PAD]", "[UNK]"


def shipped_prompts(root: Path):
    listing = root / "crates/core/data/prompt_templates.txt"
    templates = ["{}."] + [
        line for line in listing.read_text().splitlines() if line and not line.startswith("#")
    ]
    out = []
    for t in templates:
        for term in (BONA_FIDE, ATTACK):
            body = t.replace("{}", term).rstrip(".")
            out += [body, body + "."]
    return out


def build_tokenizer(prompts):
    pre = pre_tokenizers.Whitespace()
    words = sorted({w for p in prompts for w, _ in pre.pre_tokenize_str(p)})
    vocab = {tok: i for i, tok in enumerate([PAD, UNK, BOS, EOS] + words)}
    tok = Tokenizer(models.WordLevel(vocab, unk_token=UNK))
    tok.pre_tokenizer = pre
    tok.post_processor = processors.TemplateProcessing(
        single=f"{BOS} $A {EOS}",
        special_tokens=[(BOS, vocab[BOS]), (EOS, vocab[EOS])],
    )
    return tok, len(vocab)


def image_encoder(weights):
    graph = helper.make_graph(
        [
            helper.make_node("GlobalAveragePool", ["pixel_values"], ["pooled"]),
            helper.make_node("Flatten", ["pooled"], ["flat"]),
            helper.make_node("MatMul", ["flat", "proj"], ["image_embeds"]),
        ],
        "image_encoder",
        [helper.make_tensor_value_info("pixel_values", TensorProto.FLOAT, [1, 3, 224, 224])],
        [helper.make_tensor_value_info("image_embeds", TensorProto.FLOAT, [1, DIM])],
        [numpy_helper.from_array(weights, "proj")],
    )
    return helper.make_model(graph, opset_imports=[helper.make_opsetid("", OPSET)])


def text_encoder(table, context):
    graph = helper.make_graph(
        [
            helper.make_node("Gather", ["table", "input_ids"], ["tokens"], axis=0),
            helper.make_node("ReduceMean", ["tokens"], ["text_embeds"], axes=[1], keepdims=0),
        ],
        "text_encoder",
        [helper.make_tensor_value_info("input_ids", TensorProto.INT64, [1, context])],
        [helper.make_tensor_value_info("text_embeds", TensorProto.FLOAT, [1, DIM])],
        [numpy_helper.from_array(table, "table")],
    )
    return helper.make_model(graph, opset_imports=[helper.make_opsetid("", OPSET)])


def encode_text(tok, table, prompt):
    ids = tok.encode(prompt).ids
    padded = np.zeros(CONTEXT, dtype=np.int64)
    padded[: len(ids)] = ids
    return ids, table[padded].astype(np.float64).mean(axis=0)


def ramp_tensor():
    c, y, x = np.meshgrid(np.arange(3), np.arange(224), np.arange(224), indexing="ij")
    return ((c * 0.25 + y / 223.0 - x / 447.0) - 0.3).astype(np.float32)


def main():
    root = Path(__file__).resolve().parent.parent
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else root / "crates/neural/tests/fixtures"
    model_dir = out / "tiny_model"
    model_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(20240611)
    prompts = shipped_prompts(root)
    tok, vocab_size = build_tokenizer(prompts)
    proj = rng.normal(size=(3, DIM)).astype(np.float32)
    table = rng.normal(size=(vocab_size, DIM)).astype(np.float32)
    table[0] = 0.0

    tok.save(str(model_dir / "tokenizer.json"))
    onnx.save(image_encoder(proj), model_dir / "image_encoder.onnx")
    onnx.save(text_encoder(table, CONTEXT), model_dir / "text_encoder.onnx")
    onnx.save(text_encoder(table, 8), out / "text_encoder_ctx8.onnx")
    onnx.save(text_encoder(np.ascontiguousarray(table[:, :4]), CONTEXT), out / "text_encoder_dim4.onnx")

    ramp = ramp_tensor()
    image_ramp = ramp.astype(np.float64).mean(axis=(1, 2)) @ proj.astype(np.float64)
    constant = np.array([0.1, -0.2, 0.3])
    image_constant = constant @ proj.astype(np.float64)

    text = {}
    for prompt in [ATTACK + ".", BONA_FIDE + ".", "a photo of a face image morphing attack"]:
        ids, emb = encode_text(tok, table, prompt)
        text[prompt] = {"ids": ids, "embedding": emb.tolist()}

    expected = {
        "dim": DIM,
        "context": CONTEXT,
        "image_constant": {"per_channel": constant.tolist(), "embedding": image_constant.tolist()},
        "image_ramp": {"embedding": image_ramp.tolist()},
        "text": text,
    }
    (out / "expected.json").write_text(json.dumps(expected, indent=2) + "\n")


if __name__ == "__main__":
    main()
