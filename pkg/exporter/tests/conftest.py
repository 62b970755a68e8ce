import pytest

SAMPLE_CODE = [
    "int retries = 3; Thread.sleep(100); assertEquals(expected, actual);",
    "List<String> names = new ArrayList<>(); names.add(first);",
    "long stamp = System.currentTimeMillis(); record(stamp);",
    "CountDownLatch latch = new CountDownLatch(2); latch.await();",
    'Map<String, Integer> counts = new HashMap<>(); counts.put("key", 1);',
    "ExecutorService pool = Executors.newFixedThreadPool(4); pool.submit(job);",
]


@pytest.fixture(scope="session")
def encoder_dir(tmp_path_factory):
    """Tiny randomly initialized encoder with a byte-level BPE tokenizer,
    built locally so the suite never needs network access. Width 768 and a
    514-slot position table match the real checkpoint's geometry."""
    import torch
    from tokenizers import Tokenizer, decoders, pre_tokenizers, processors, trainers
    from tokenizers.models import BPE
    from transformers import PreTrainedTokenizerFast, RobertaConfig, RobertaModel

    target = tmp_path_factory.mktemp("tiny-encoder")
    tokenizer = Tokenizer(BPE(unk_token="<unk>"))
    tokenizer.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    tokenizer.decoder = decoders.ByteLevel()
    trainer = trainers.BpeTrainer(
        vocab_size=400,
        min_frequency=1,
        special_tokens=["<s>", "<pad>", "</s>", "<unk>", "<mask>"],
        initial_alphabet=pre_tokenizers.ByteLevel.alphabet(),
    )
    tokenizer.train_from_iterator(SAMPLE_CODE, trainer)
    tokenizer.post_processor = processors.RobertaProcessing(
        sep=("</s>", tokenizer.token_to_id("</s>")),
        cls=("<s>", tokenizer.token_to_id("<s>")),
    )
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tokenizer,
        bos_token="<s>",
        eos_token="</s>",
        cls_token="<s>",
        sep_token="</s>",
        unk_token="<unk>",
        pad_token="<pad>",
        mask_token="<mask>",
        model_max_length=512,
    )
    fast.save_pretrained(target)
    config = RobertaConfig(
        vocab_size=max(fast.vocab_size, 400),
        hidden_size=768,
        num_hidden_layers=1,
        num_attention_heads=4,
        intermediate_size=256,
        max_position_embeddings=514,
        type_vocab_size=1,
    )
    torch.manual_seed(0)
    RobertaModel(config).save_pretrained(target)
    return target
