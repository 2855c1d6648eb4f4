"""Tokenization and textual feature extraction."""

from src.text.encoder import HashedTextEncoder, TextEncoderBase, TextEncoderConfig, encode_text
from src.text.tokenizer import TokenSequence, Utterance, load_transcript, tokenize, tokenize_utterances

__all__ = ['HashedTextEncoder', 'TextEncoderBase', 'TextEncoderConfig', 'TokenSequence', 'Utterance',
           'encode_text', 'load_transcript', 'tokenize', 'tokenize_utterances']
