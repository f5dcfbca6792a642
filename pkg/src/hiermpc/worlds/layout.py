"""Index layouts for the flat state, control and parameter vectors used by the kernels."""

# robot block, shared by both worlds
X, Y, YAW = 0, 1, 2
VX, VY, WZ = 3, 4, 5
PITCH, ROLL = 6, 7
PITCH_RATE, ROLL_RATE = 8, 9
HEIGHT, HEIGHT_RATE = 10, 11
ARM_Q = 12  # 6 entries
ARM_QD = 18  # 6 entries
GRIP = 24
FALLEN = 25
ROBOT_DIM = 26

# push world object block
OX, OY, OYAW = 26, 27, 28
OVX, OVY, OWZ = 29, 30, 31
PUSH_DIM = 32

# hinge world object block
THETA, OMEGA = 26, 27
HINGE_DIM = 28

# joint controls: 12 leg channels (FL, FR, HL, HR x hip_x, hip_y, knee), 6 arm, 1 gripper
U_LEG = 0
U_ARM = 12
U_GRIP = 18
CONTROL_DIM = 19

# world kinds
PUSH = 0
HINGE = 1

# input modes for the simulation kernel
MODE_POLICY = 0
MODE_PASSTHROUGH = 1
MODE_RAW = 2

# parameter vector
P_G = 0
P_BASE_ACC = 1
P_YAW_ACC = 2
P_HEIGHT_ACC = 3
P_TILT_ACC = 4
P_ARM_ACC = 5
P_GRIP_RATE = 6
P_BASE_DRAG = 7
P_YAW_DRAG = 8
P_HEIGHT_DAMP = 9
P_NOM_HEIGHT = 10
P_FALL_TILT = 11
P_ARM_DAMP = 12
P_ARM_LIMIT = 13
P_HEIGHT_MIN = 14
P_HEIGHT_MAX = 15
P_GRIP_MIN = 16
P_GRIP_MAX = 17
P_SHOULDER_X = 18
P_L1 = 19
P_L2 = 20
P_SHOULDER_Z = 21
P_EFF_Z = 22
P_BASE_RADIUS = 23
P_EFF_RADIUS = 24
P_CONTACT_K = 25
P_CONTACT_B = 26
P_CONTACT_MU = 27
P_TANGENT_B = 28
P_OBJ_MASS = 29
P_OBJ_RADIUS = 30
P_GROUND_MU = 31
P_PIVOT_X = 32
P_PIVOT_Y = 33
P_PLATE_LEN = 34
P_PLATE_WIDTH = 35
P_PLATE_RADIUS = 36
P_BALANCE = 37
P_HINGE_DAMP = 38
N_PARAMS = 39

# policy gain vector
K_VEL = 0
K_YAW = 1
K_TILT_P = 2
K_TILT_D = 3
K_HEIGHT_P = 4
K_HEIGHT_D = 5
K_ARM_P = 6
K_ARM_D = 7
K_GRIP = 8
K_LEG_NULL = 9
N_GAINS = 10
