"""Leader-follower teleoperation stack for a 3-armed parallel robot.

Kinematics for both devices, the real-time motion-transfer pipeline,
stepper pulse actuation against a simulated plant, workspace-limit haptic
rendering, a deterministic closed-loop simulation harness and a live
WebSocket session server.
"""

from .actuation import (FollowerActuation, MotorBank, MotorConfig, PlantState,
                        PulseCommander, PulseFrame, SingularPose, joint_rates,
                        plant_apply, pulse_step)
from .config import (ConfigError, RunConfig, ScenarioConfig, config_from_dict,
                     load_config)
from .delta import (BranchViolation, ChainAngles, DeltaGeometry, Unreachable,
                    WristLimits, chain_forward, chain_residual, delta_home,
                    solve_chain_ik, solve_delta_ik, to_chain_frame)
from .geometry import (OutOfInterval, Pose6, TimedSample, Twist, Wrench,
                       lerp_pose, pose_delta)
from .haptics import (HapticConfig, HapticFrame, HapticRenderer, ProxyClouds,
                      build_clouds, evaluate_violation, fibonacci_sphere,
                      render_wrench)
from .pipeline import (Channel, InvalidDuration, KalmanAxisState,
                       LeaderPipeline, PipelineConfig, PoseKalman,
                       PoseSmoother, RateLimiter, ScaleConfig,
                       TrajectoryPacket, Upsampler, dynamic_scale,
                       incremental_map, kalman_step, timed_move)
from .simulate import (EmptyTrajectory, ErrorReport, error_metrics,
                       replay_packets, run_closed_loop, synth_hand)
from .triarm import (DegenerateLeg, Jacobian, JointVector, NoConvergence,
                     TriarmGeometry, joint_margins, margins_batch, triarm_fk,
                     triarm_ik, triarm_jacobian, workspace_margin)

__version__ = "0.1.0"
