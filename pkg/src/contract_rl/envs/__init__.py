from .coin import CoinGameState, coin_game_reset, coin_game_step, make_coin_game
from .prisoners import COOPERATE, DEFECT, make_prisoners_dilemma
from .toy import figure1_threat_policy, make_divergence_mdp, make_figure1_mdp
from .tree import TreeGenConfig, generate_tree_mdp
from .validation import ValidationRecord, learned_policy, oracle_validate
