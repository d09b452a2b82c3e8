"""semgrid: deterministic gridworld simulator for episodic object memory,
structured match/caption/action protocol, data association, disagreement-
driven exploration, consensus pseudo-captioning, and the metrics to judge
them. Everything is seeded; identical configuration and seeds reproduce
episode logs byte for byte.
"""
from .aggregator import (PseudoCaption, ViewRecord, consensus_caption,
                         frequency_baseline, select_informative_views)
from .association import (AssociationConfig, AssociationMetrics,
                          AssociationRecord, apply_matches, associate_heuristic,
                          associate_oracle, evaluate_association)
from .explorer import (DisagreementMap, DisagreementPolicy, ExplorationConfig,
                       FrontierPolicy, PolicyState, RandomGoalPolicy,
                       TargetRegion, Viewpoint, build_disagreement_map,
                       candidate_viewpoints, detect_stuck, extract_targets,
                       make_policy, object_disagreement, rank_viewpoints,
                       recover)
from .memory import (EpisodicMemory, ObjectEntry, UnknownEntryError,
                     discretize_position, serialize, token_count)
from .metrics import (AttributeScore, ConsistencyReport, InsufficientDataError,
                      ScalabilityDiagnostics, TimingProfile, UndefinedMetricsError,
                      attribute_f1, caption_consistency, memory_scalability,
                      timing_profile)
from .oracle import (Caption, Embedder, NoiseModel, caption_object,
                     cosine_similarity, render_caption)
from .protocol import (MatchDecision, ProtocolError, PromptDocument,
                       StructuredOutput, format_prompt, parse_memory,
                       parse_output, render_output)
from .vocabulary import (DEFAULT_VOCABULARY, AttributeSet, Vocabulary,
                         default_vocabulary, tokenize)
from .world import (ACTIONS, AgentPose, Detection, ExploredMap, GenerationError,
                    GridWorld, Observation, SensorConfig, WorldObject,
                    WorldSpec, generate_world, is_navigable, line_of_sight,
                    observe, shortest_path, step_agent, update_explored,
                    visible_cells)
from .worldio import load_world, save_world, world_from_text, world_hash, world_to_text

__version__ = "0.1.0"
