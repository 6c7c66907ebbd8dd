import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffusearch import chessboard as chess
from diffusearch import codec, data
from diffusearch.chessboard import BoardState, Move
from diffusearch.codec import (
    ACTION_COUNT,
    STATE_LEN,
    LayoutError,
    UnknownAction,
    Vocabulary,
    centipawn_to_bin,
)


def independent_action_enumeration() -> list[str]:
    """Oracle built differently from the codec: filter all 64x64 square pairs
    by explicit queen/knight displacement tests, then add promotions."""
    moves = []
    for a in range(64):
        fa, ra = a % 8, a // 8
        for b in range(64):
            if a == b:
                continue
            fb, rb = b % 8, b // 8
            df, dr = abs(fa - fb), abs(ra - rb)
            queen_like = df == 0 or dr == 0 or df == dr
            knight_like = {df, dr} == {1, 2}
            if queen_like or knight_like:
                moves.append(chess.square_name(a) + chess.square_name(b))
    for fa in range(8):
        for ra, rb in ((6, 7), (1, 0)):
            for fb in (fa - 1, fa, fa + 1):
                if 0 <= fb < 8:
                    for promo in "qrbn":
                        moves.append(
                            chess.square_name(ra * 8 + fa)
                            + chess.square_name(rb * 8 + fb)
                            + promo
                        )
    return sorted(set(moves))


class TestActionTable:
    def test_exactly_1968_actions(self, vocab):
        assert len(vocab.action_table) == ACTION_COUNT == 1968

    def test_matches_independent_enumeration(self, vocab):
        assert vocab.action_table == independent_action_enumeration()

    def test_action_index_inverse(self, vocab):
        for k in range(0, ACTION_COUNT, 97):
            assert vocab.action_index(vocab.action_table[k]) == k

    def test_e2e4_rank(self, vocab):
        oracle = independent_action_enumeration()
        assert vocab.action_index("e2e4") == oracle.index("e2e4")

    def test_unknown_action_raises(self, vocab):
        with pytest.raises(UnknownAction):
            vocab.action_index("e2d5")  # not a queen/knight displacement

    def test_closure_over_playouts(self, vocab, playout_positions):
        for state in playout_positions:
            for move in chess.legal_moves(state):
                assert move.uci() in vocab._action_index


class TestStateEncoding:
    def test_initial_position_layout(self, vocab):
        text = codec.encode_state_chars(BoardState.initial())
        assert len(text) == STATE_LEN == 77
        assert text[:8] == "rnbqkbnr"
        assert text[16:48] == "." * 32  # four empty ranks expanded
        assert text[64] == "w"
        assert text[65:69] == "KQkq"
        assert text[69:71] == "-."
        assert text[71:74] == "0.."
        assert text[74:77] == "1.."

    def test_roundtrip_on_playouts(self, vocab, playout_positions):
        for state in playout_positions:
            tokens = vocab.encode_state(state)
            assert len(tokens) == 77
            assert vocab.decode_state(tokens) == state

    def test_injective(self, vocab, playout_positions):
        encodings = {codec.encode_state_chars(s) for s in playout_positions}
        assert len(encodings) == len(set(playout_positions))

    def test_decode_rejects_garbage(self, vocab):
        with pytest.raises(codec.DecodeError):
            codec.decode_state_chars("x" * 77)
        with pytest.raises(codec.DecodeError):
            vocab.decode_state(np.full(77, vocab.mask_id))


class TestValueBins:
    def test_zero_centipawns_is_bin_64(self):
        assert centipawn_to_bin(0) == 64

    def test_mate_sentinels_saturate(self):
        assert centipawn_to_bin(codec.MATE_SCORE_CP) == 127
        assert centipawn_to_bin(-codec.MATE_SCORE_CP) == 0

    def test_monotone(self):
        values = [centipawn_to_bin(cp) for cp in range(-32_000, 32_001, 250)]
        assert values == sorted(values)

    @given(cp=st.integers(min_value=-50_000, max_value=50_000))
    @settings(max_examples=200, deadline=None)
    def test_in_range(self, cp):
        assert 0 <= centipawn_to_bin(cp) < 128

    def test_bin_to_value_midpoints(self):
        assert codec.bin_to_value(64) == pytest.approx(2 * (64.5 / 128) - 1)
        assert -1 < codec.bin_to_value(0) < codec.bin_to_value(127) < 1


class TestLayouts:
    @pytest.mark.parametrize(
        "paradigm,h,expected",
        [
            ("s-a", 1, 78),
            ("s-v", 1, 78),
            ("sa-v", 1, 79),
            ("s-aa", 4, 81),
            ("s-asa", 4, 312),
            ("s-ass", 4, 309),
            ("s-avav", 4, 85),
            ("s-avsav", 4, 316),
        ],
    )
    def test_sequence_lengths(self, paradigm, h, expected):
        assert codec.sequence_length(paradigm, h) == expected

    def test_s_asa_span_order(self):
        spans = codec.future_layout("s-asa", 4)
        assert spans == [
            ("action", 0), ("state", 1), ("action", 1), ("state", 2),
            ("action", 2), ("state", 3), ("action", 3),
        ]

    def test_single_step_paradigms_reject_horizon(self):
        with pytest.raises(LayoutError):
            codec.future_layout("s-a", 2)

    def test_unknown_paradigm(self):
        with pytest.raises(LayoutError):
            codec.future_layout("s-x", 1)

    def test_token_sequence_length_checked(self, vocab):
        with pytest.raises(LayoutError):
            codec.TokenSequence(tokens=np.zeros(10, dtype=np.int64), paradigm="s-asa", h=4)


class TestAssembleRoundtrip:
    @pytest.mark.parametrize("paradigm", codec.PARADIGMS)
    @pytest.mark.parametrize("h", [1, 2, 4, 7])
    def test_roundtrip_every_paradigm(self, vocab, toy_oracle, paradigm, h):
        if paradigm in ("s-a", "s-v", "sa-v") and h != 1:
            pytest.skip("single-step paradigm")
        state = BoardState.initial()
        record = data.rollout_future(state, h, toy_oracle, paradigm=paradigm)
        seq = codec.assemble_sequence(record, vocab)
        assert len(seq) == codec.sequence_length(paradigm, h)
        assert data.decode_record(seq.tokens, paradigm, h, vocab) == record

    def test_truncated_future_pads(self, vocab, toy_oracle):
        # One ply from checkmate: the future truncates immediately after a0.
        state = BoardState.from_fen(
            "rnbqkbnr/pppp1ppp/8/4p3/6P1/5P2/PPPPP2P/RNBQKBNR b KQkq g3 0 2"
        )
        record = data.rollout_future(state, 4, toy_oracle, paradigm="s-asa")
        assert record.actions[0] is not None
        assert record.actions[1] is None
        # The terminal successor state is still recorded; all later spans pad.
        assert record.states[0] is not None and chess.outcome(record.states[0]) is not None
        seq = codec.assemble_sequence(record, vocab)
        assert seq.tokens[STATE_LEN] != vocab.pad_id
        assert (seq.tokens[STATE_LEN + 1 + STATE_LEN :] == vocab.pad_id).all()
        assert data.decode_record(seq.tokens, "s-asa", 4, vocab) == record

    def test_first_l_tokens_decode_to_state(self, vocab, toy_oracle, playout_positions):
        for state in playout_positions[:10]:
            record = data.rollout_future(state, 2, toy_oracle, paradigm="s-aa")
            seq = codec.assemble_sequence(record, vocab)
            assert vocab.decode_state(seq.tokens[:STATE_LEN]) == state


class TestVocabularySerialization:
    def test_golden_file_matches_build(self, vocab):
        assert vocab.hash == Vocabulary.build().hash

    def test_json_roundtrip(self, vocab):
        clone = Vocabulary.from_json(vocab.to_json())
        assert clone.tokens == vocab.tokens
        assert clone.hash == vocab.hash

    def test_mask_distinct_from_data_tokens(self, vocab):
        assert vocab.tokens.count(codec.MASK_TOKEN) == 1
        assert vocab.mask_id != vocab.pad_id

    def test_category_count(self, vocab):
        specials = 2
        assert vocab.size == len(vocab.state_alphabet) + ACTION_COUNT + 128 + specials
