"""Fixtures: small randomly initialized encoders saved to local directories.

No test touches the network; the tokenizer is a character-level wordpiece
over a-z built in place, and the encoder weights are random but fixed by a
seed, which is all the export logic needs (it never relies on what the
embeddings mean, only on shapes, alignment, and determinism).
"""

import pytest
import torch
from tokenizers import Tokenizer
from tokenizers.models import WordPiece
from tokenizers.pre_tokenizers import BertPreTokenizer
from tokenizers.processors import TemplateProcessing
from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def build_model_dir(path, hidden_size: int, num_layers: int = 4) -> str:
    letters = [chr(c) for c in range(ord("a"), ord("z") + 1)]
    tokens = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    tokens += letters + ["##" + c for c in letters]
    vocab = {t: i for i, t in enumerate(tokens)}

    inner = Tokenizer(WordPiece(vocab, unk_token="[UNK]", max_input_chars_per_word=100))
    inner.pre_tokenizer = BertPreTokenizer()
    inner.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=inner,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
        model_max_length=128,
    )

    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=hidden_size,
        num_hidden_layers=num_layers,
        num_attention_heads=4,
        intermediate_size=2 * hidden_size,
        max_position_embeddings=256,
    )
    torch.manual_seed(0)
    model = BertModel(config)
    model.eval()

    model.save_pretrained(path)
    tokenizer.save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> str:
    return build_model_dir(tmp_path_factory.mktemp("enc32"), hidden_size=32)


@pytest.fixture(scope="session")
def base_model_dir(tmp_path_factory) -> str:
    return build_model_dir(tmp_path_factory.mktemp("enc768"), hidden_size=768)
